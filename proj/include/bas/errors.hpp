#pragma once

#include <stdexcept>
#include <string>

namespace bas {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string &msg) : std::runtime_error("config error: " + msg) {}
};

struct IngestError : std::runtime_error {
  explicit IngestError(const std::string &msg) : std::runtime_error("ingest error: " + msg) {}
};

struct ContractError : std::runtime_error {
  explicit ContractError(const std::string &msg) : std::runtime_error("contract error: " + msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string &msg) : std::runtime_error("numeric error: " + msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string &msg) : std::runtime_error("io error: " + msg) {}
};

}  // namespace bas
