#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace camo {

// Exit codes shared by every subcommand.
enum class ExitCode : int {
    kOk = 0,
    kConfig = 1,
    kMissingData = 2,
    kVerification = 3,
};

// Tensor extents disagree with an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A manifest or serialized file violates its documented format.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Referenced inputs (frames, masks, predictions) do not exist.
class MissingDataError : public std::runtime_error {
public:
    MissingDataError(const std::string& what, std::vector<std::string> missing)
        : std::runtime_error(what), missing_(std::move(missing)) {}

    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::vector<std::string> missing_;
};

}  // namespace camo
