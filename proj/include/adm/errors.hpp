#pragma once

#include <stdexcept>
#include <string>

namespace adm {

// Thrown when eval_g needs CDF entries past the end of the table it was given.
class TableTooSmallError : public std::domain_error {
 public:
  explicit TableTooSmallError(const std::string& what) : std::domain_error(what) {}
};

// Thrown by operations that require the monotone regime u >= p.
class RegimeError : public std::domain_error {
 public:
  explicit RegimeError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace adm
