#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tic {

// Base of everything the library throws on purpose. The CLI maps
// ConfigError to exit 2 and every other Error to exit 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

class MinimizationError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

// non-finite update inside a backward march; carries the layer index
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int layer)
        : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
    int layer() const { return layer_; }

private:
    int layer_;
};

// forward path blew up
class BlowUpError : public Error {
public:
    BlowUpError(int path, int step)
        : Error("non-finite state on path " + std::to_string(path) + " at step " +
                std::to_string(step)),
          path_(path), step_(step) {}
    int path() const { return path_; }
    int step() const { return step_; }

private:
    int path_;
    int step_;
};

// fixed-point iteration ran out of sweeps
class PicardError : public Error {
public:
    PicardError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}
    const std::vector<double>& history() const { return history_; }

private:
    std::vector<double> history_;
};

}  // namespace tic
