#ifndef SHEARLAB_ERRORS_HPP
#define SHEARLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shearlab {

/// Base class for every failure raised by the library.
///
/// `kind()` is a short machine-readable tag; the CLI copies it into the
/// error JSON it prints on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Invalid parameter or argument outside an operation's domain.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

/// A numerical procedure did not converge or left its admissible region.
class NumericalError : public Error {
 public:
  NumericalError(std::string kind, const std::string& what)
      : Error(std::move(kind), what) {}
};

}  // namespace shearlab

#endif  // SHEARLAB_ERRORS_HPP
