#pragma once
#include <nlohmann/json.hpp>

#include "quant/nn.hpp"

// json-level checkpoint pieces shared by the nn/dynamics/agents serializers.
namespace quant::nn {

nlohmann::json mlp_jobj(const Mlp<double>& net);
Mlp<double> mlp_unjobj(const nlohmann::json& j);
nlohmann::json vec_jobj(const Vec& v);
Vec vec_unjobj(const nlohmann::json& j);

}  // namespace quant::nn
