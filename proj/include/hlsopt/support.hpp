#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace hlsopt {

/// Lightweight success-or-error return type used by operations that report
/// rich diagnostics instead of throwing.
template <class T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}  // NOLINT: implicit by design
  static Result failure(std::string message) {
    Result r;
    r.error_ = std::move(message);
    return r;
  }

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!value_) throw std::logic_error("Result::value on error: " + error_);
    return *value_;
  }
  T&& value() && {
    if (!value_) throw std::logic_error("Result::value on error: " + error_);
    return std::move(*value_);
  }
  const T* operator->() const { return &value(); }
  // Dereferencing an rvalue Result yields a value, not a reference into the
  // dying temporary (`for (auto& x : *f())` stays safe).
  const T& operator*() const& { return value(); }
  T operator*() && { return std::move(*this).value(); }

  const std::string& error() const { return error_; }

 private:
  Result() = default;
  std::optional<T> value_;
  std::string error_;
};

}  // namespace hlsopt
