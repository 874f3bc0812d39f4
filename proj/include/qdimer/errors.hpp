#pragma once

#include <stdexcept>
#include <string>

namespace qdimer {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// requested branch does not exist at this pump; foldPump is where it ends
struct BranchAbsent : std::runtime_error {
  BranchAbsent(const std::string& what, double fold) : std::runtime_error(what), foldPump(fold) {}
  double foldPump;
};

struct NoSignChange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularFrequency : std::runtime_error {
  SingularFrequency(const std::string& what, double w) : std::runtime_error(what), omega(w) {}
  double omega;
};

struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, long long traj, double t)
      : std::runtime_error(what), trajectory(traj), time(t) {}
  long long trajectory;
  double time;
};

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qdimer
