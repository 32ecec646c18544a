// SPDX-License-Identifier: Apache-2.0

#include "fovseg/optim.hpp"

#include <cmath>

#include "fovseg/common.hpp"
#include "fovseg/kernels.hpp"
#include "fovseg/tensor.hpp"

namespace fovseg {

Parameter& ParamSet::add(const std::string& name, std::vector<int> shape, bool trainable) {
    FOV_CONFIG_REQUIRE(find(name) == nullptr, "duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->shape = std::move(shape);
    p->value.assign(numel(p->shape), 0.0);
    p->grad.assign(p->value.size(), 0.0);
    p->trainable = trainable;
    items_.push_back(std::move(p));
    return *items_.back();
}

Parameter* ParamSet::find(const std::string& name) {
    for (auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

const Parameter* ParamSet::find(const std::string& name) const {
    for (const auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

void ParamSet::zero_grad() {
    for (auto& p : items_) p->zero_grad();
}

void ParamSet::copy_values_from(const ParamSet& other) {
    for (auto& p : items_) {
        const Parameter* src = other.find(p->name);
        FOV_CONFIG_REQUIRE(src != nullptr, "copy_values_from: missing parameter " + p->name);
        FOV_CONFIG_REQUIRE(src->shape == p->shape, "copy_values_from: shape mismatch for " + p->name);
        p->value = src->value;
    }
}

void he_init(Parameter& p, int fan_in, RngStream& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : p.value) v = std_dev * rng.gaussian();
}

double poly_lr(long t, long T, double lr0, double power) {
    FOV_REQUIRE(T >= 1, "poly_lr: T must be >= 1");
    FOV_REQUIRE(t >= 0 && t <= T, "poly_lr: t out of [0, T]");
    return lr0 * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(T), power);
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step(double lr_t) {
    FOV_REQUIRE(lr_t >= 0.0, "adam: negative learning rate");
    // Validate every gradient before touching any state, so a bad step
    // leaves parameters and moments unchanged.
    for (const Parameter* p : params_) {
        const long bad = kernels::first_nonfinite(p->size(), p->grad.data());
        if (bad >= 0) throw NonFiniteGradient(p->name, bad);
    }
    ++t_;
    const double bc1 = 1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const double bc2 = 1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter* p = params_[i];
        kernels::adam_update(p->size(), p->value.data(), p->grad.data(), m_[i].data(),
                             v_[i].data(), lr_t, cfg_.beta1, cfg_.beta2, cfg_.eps,
                             cfg_.weight_decay, bc1, bc2);
    }
}

}  // namespace fovseg
