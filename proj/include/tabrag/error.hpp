#pragma once

#include <stdexcept>
#include <string>

namespace tabrag {

// Base class for every error raised by the library. Callers that want to
// keep a batch running catch this and record the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad table, schema, split file, config, prediction file.
class InputError : public Error {
 public:
  using Error::Error;
};

// A call violated a documented precondition (dimension mismatch, unknown
// feature, invalid mode).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Network/transport problems talking to an LLM endpoint.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace tabrag
