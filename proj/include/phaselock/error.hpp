#pragma once

#include <stdexcept>
#include <string>

namespace phaselock
{

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

/// Caller broke a documented precondition (unsorted input, short trace, ...).
class ContractError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

/// Configuration could not be parsed or failed validation.
class ConfigError : public std::runtime_error
{
  public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(what), field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

  private:
    std::string field_;
};

/// A 10-90% transition could not be located in the requested interval.
class NoTransitionError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

} // namespace phaselock
