#pragma once

#include <stdexcept>
#include <string>

namespace lightweather {

/// Base class for every error raised by the library. `category()` is a short,
/// stable, machine-parsable tag ("shape error", "ingestion error", ...).
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    [[nodiscard]] const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

#define LIGHTWEATHER_ERROR_TYPE(Name, Tag)                                      \
    class Name : public Error {                                                 \
    public:                                                                     \
        explicit Name(const std::string& what) : Error(Tag, what) {}            \
    };

LIGHTWEATHER_ERROR_TYPE(ShapeError, "shape error")
LIGHTWEATHER_ERROR_TYPE(ValidationError, "validation error")
LIGHTWEATHER_ERROR_TYPE(OptimizerError, "optimizer error")
LIGHTWEATHER_ERROR_TYPE(IngestionError, "ingestion error")
LIGHTWEATHER_ERROR_TYPE(ConfigError, "config error")
LIGHTWEATHER_ERROR_TYPE(DegenerateVariableError, "degenerate-variable error")
LIGHTWEATHER_ERROR_TYPE(TrainingError, "training error")
LIGHTWEATHER_ERROR_TYPE(EvaluationError, "evaluation error")
LIGHTWEATHER_ERROR_TYPE(CheckpointError, "checkpoint error")

#undef LIGHTWEATHER_ERROR_TYPE

}  // namespace lightweather
