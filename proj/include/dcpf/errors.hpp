#pragma once

#include <stdexcept>
#include <string>

namespace dcpf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, missing paths, inconsistent options.
struct ConfigError : Error {
  using Error::Error;
};

// Bad data: malformed grid/dataset/checkpoint files, dimension mismatches.
struct DataError : Error {
  using Error::Error;
};

struct DimensionMismatch : DataError {
  using DataError::DataError;
};

// Energized graph is not a single connected component containing the slack bus.
struct IslandedGrid : Error {
  using Error::Error;
};

// Reduced nodal matrix failed to factorize; signals an upstream bug for
// accepted topologies.
struct SingularSystem : Error {
  using Error::Error;
};

// Topology sampling kept islanding the grid past the retry budget.
struct RetriesExhausted : Error {
  using Error::Error;
};

// Training loss went NaN/inf; the run is aborted and reported.
struct NonFiniteLoss : Error {
  using Error::Error;
};

}  // namespace dcpf
