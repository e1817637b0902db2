#pragma once

#include <stdexcept>
#include <string>

namespace sentrec {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (CLI flags, config file, op arguments).
struct ConfigError : Error {
  using Error::Error;
};

// Missing or unreadable files.
struct IoError : Error {
  using Error::Error;
};

// A completion or payload that could not be interpreted. Carries the raw
// text so callers can log or persist it for inspection.
struct ParseError : Error {
  std::string raw;
  ParseError(const std::string& what, std::string raw_text)
      : Error(what), raw(std::move(raw_text)) {}
};

// A remote call that failed after retries. Carries the key of the work item
// that was in flight so pipelines can report it.
struct ClientError : Error {
  std::string key;
  ClientError(const std::string& what, std::string item_key = {})
      : Error(what), key(std::move(item_key)) {}
};

}  // namespace sentrec
