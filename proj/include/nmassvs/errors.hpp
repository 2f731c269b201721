#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmassvs {

/// Input problems. Carries every message found in one pass over the input.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> messages);
    explicit ValidationError(const std::string& message)
        : ValidationError(std::vector<std::string>{message}) {}

    const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
    std::vector<std::string> messages_;
};

/// Factorization or likelihood failure during sampling or exact evaluation.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t iteration = npos)
        : std::runtime_error(format(what, iteration)), iteration_(iteration) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t iteration() const noexcept { return iteration_; }

private:
    static std::string format(const std::string& what, std::size_t iteration) {
        if (iteration == npos) return what;
        return what + " (iteration " + std::to_string(iteration) + ")";
    }
    std::size_t iteration_;
};

inline ValidationError::ValidationError(std::vector<std::string> messages)
    : std::runtime_error([&] {
          std::string joined;
          for (const auto& m : messages) {
              if (!joined.empty()) joined += "\n";
              joined += m;
          }
          return joined;
      }()),
      messages_(std::move(messages)) {}

} // namespace nmassvs
