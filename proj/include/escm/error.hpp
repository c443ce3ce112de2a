#pragma once

#include <stdexcept>
#include <string>

namespace escm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class InvalidTransition : public Error {
 public:
  using Error::Error;
};

class CandidateShortage : public Error {
 public:
  using Error::Error;
};

class NoServerInRange : public Error {
 public:
  using Error::Error;
};

class AddressUnknown : public Error {
 public:
  using Error::Error;
};

class ChainMismatch : public Error {
 public:
  using Error::Error;
};

class ElectedDroneLost : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OutputError : public Error {
 public:
  using Error::Error;
};

}  // namespace escm
