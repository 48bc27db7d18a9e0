#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "czsl/tensor.hpp"

namespace czsl {

using GradMap = std::map<std::string, Tensor2>;

// Named parameter tensors plus per-parameter optimizer state and non-trainable
// buffers (batch-norm running statistics). Names are hierarchical, e.g.
// "gA_inv.layer0.W".
class ParamStore {
  public:
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    Tensor2& create(const std::string& name, Tensor2 init);
    Tensor2& at(const std::string& name);
    const Tensor2& at(const std::string& name) const;

    bool has_buffer(const std::string& name) const { return buffers_.count(name) > 0; }
    Tensor2& create_buffer(const std::string& name, Tensor2 init);
    Tensor2& buffer(const std::string& name);
    const Tensor2& buffer(const std::string& name) const;

    const std::map<std::string, Tensor2>& params() const { return params_; }
    const std::map<std::string, Tensor2>& buffers() const { return buffers_; }

    // Optimizer state, lazily created with the parameter's shape.
    Tensor2& state(const std::string& slot, const std::string& name);
    int64_t step_count() const { return step_count_; }
    void increment_step() { ++step_count_; }

    std::vector<std::string> param_names() const;

    // Flat binary checkpoint; doubles are stored raw so round-trips are bit-exact.
    void save(const std::string& path) const;
    static ParamStore load(const std::string& path);

  private:
    std::map<std::string, Tensor2> params_;
    std::map<std::string, Tensor2> buffers_;
    std::map<std::string, std::map<std::string, Tensor2>> state_;
    int64_t step_count_ = 0;
};

}  // namespace czsl
