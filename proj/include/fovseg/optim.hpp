// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fovseg/rng.hpp"

namespace fovseg {

// Long-lived named parameter. Buffers (BatchNorm running moments) are
// parameters with trainable = false: checkpointed, never optimized.
struct Parameter {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool trainable = true;

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class ParamSet {
public:
    Parameter& add(const std::string& name, std::vector<int> shape, bool trainable = true);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    std::vector<std::unique_ptr<Parameter>>& items() { return items_; }
    const std::vector<std::unique_ptr<Parameter>>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    void zero_grad();
    // Copy values and buffer contents from another set (matched by name).
    void copy_values_from(const ParamSet& other);

private:
    std::vector<std::unique_ptr<Parameter>> items_;
};

// He (fan-in) initialization: N(0, sqrt(2 / fan_in)).
void he_init(Parameter& p, int fan_in, RngStream& rng);

// lr0 * (1 - t/T)^power; requires T >= 1 and 0 <= t <= T.
double poly_lr(long t, long T, double lr0, double power);

struct AdamConfig {
    double lr0 = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2, added to the gradient
};

// Thrown when a gradient is non-finite; the step is aborted untouched.
struct NonFiniteGradient : std::runtime_error {
    NonFiniteGradient(const std::string& param, long index)
        : std::runtime_error("non-finite gradient in '" + param + "' at index " +
                             std::to_string(index)),
          param_name(param),
          flat_index(index) {}
    std::string param_name;
    long flat_index;
};

class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    // One update from the parameters' current .grad at learning rate lr_t.
    void step(double lr_t);

    long t() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<Parameter*>& params() const { return params_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

}  // namespace fovseg
