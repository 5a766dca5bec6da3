#pragma once

#include <stdexcept>
#include <string>

namespace pathcurv {

struct OutOfChart : std::runtime_error {
  explicit OutOfChart(const std::string& what) : std::runtime_error(what) {}
};

struct SingularMetric : std::runtime_error {
  explicit SingularMetric(const std::string& what) : std::runtime_error(what) {}
};

struct StepRejected : std::runtime_error {
  explicit StepRejected(const std::string& what) : std::runtime_error(what) {}
};

struct TimesNotOnGrid : std::runtime_error {
  explicit TimesNotOnGrid(const std::string& what) : std::runtime_error(what) {}
};

struct NonDifferentiableRadius : std::runtime_error {
  explicit NonDifferentiableRadius(const std::string& what) : std::runtime_error(what) {}
};

struct NegativeMass : std::runtime_error {
  explicit NegativeMass(const std::string& what) : std::runtime_error(what) {}
};

struct NoBackend : std::runtime_error {
  explicit NoBackend(const std::string& what) : std::runtime_error(what) {}
};

struct NoCoveringChart : std::runtime_error {
  explicit NoCoveringChart(const std::string& what) : std::runtime_error(what) {}
};

struct AllZeroExits : std::runtime_error {
  explicit AllZeroExits(const std::string& what) : std::runtime_error(what) {}
};

struct InconclusivePower : std::runtime_error {
  explicit InconclusivePower(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pathcurv
