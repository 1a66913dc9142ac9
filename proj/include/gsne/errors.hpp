#pragma once

#include <stdexcept>
#include <string>

namespace gsne {

// Exit code classes used by the CLI: 1 usage, 2 data/validation, 3 numeric.
enum class error_class { usage = 1, data = 2, numeric = 3 };

class gsne_error : public std::runtime_error {
public:
    gsne_error(error_class cls, const std::string& msg)
        : std::runtime_error(msg), cls_(cls) {}
    error_class cls() const { return cls_; }

private:
    error_class cls_;
};

// Bad or inconsistent user input: files, schemas, ids, value ranges.
class input_error : public gsne_error {
public:
    explicit input_error(const std::string& msg) : gsne_error(error_class::data, msg) {}
};

// Structural failures while assembling the graph (isolated components, empty partitions).
class construction_error : public gsne_error {
public:
    explicit construction_error(const std::string& msg) : gsne_error(error_class::data, msg) {}
};

// Unreadable or corrupt binary artifacts (graph bundles, checkpoints).
class load_error : public gsne_error {
public:
    explicit load_error(const std::string& msg) : gsne_error(error_class::data, msg) {}
};

// Bad configuration values or misuse of a configured model (e.g. context store absent).
class config_error : public gsne_error {
public:
    explicit config_error(const std::string& msg) : gsne_error(error_class::data, msg) {}
};

// Non-finite losses, solver breakdowns, failed numeric checks.
class numeric_error : public gsne_error {
public:
    explicit numeric_error(const std::string& msg) : gsne_error(error_class::numeric, msg) {}
};

} // namespace gsne
