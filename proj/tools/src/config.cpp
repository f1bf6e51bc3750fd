// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include <string>

#include "segravir/cli.hpp"
#include "segravir/error.hpp"

namespace segravir::cli {

using nlohmann::json;

namespace {

json common(const std::string& out) {
  return {{"seed", 0}, {"out", out}, {"threads", 1}};
}

json model_defaults() {
  return {{"input_channels", 0},  // 0: taken from the data
          {"base_channels", 32},
          {"num_resolutions", 4},
          {"num_classes", 3},
          {"dropout_rate", 0.1},
          {"aux_enabled", true}};
}

json train_defaults() {
  return {{"patch_size", 256},
          {"batch_size", 6},
          {"epochs", 600},
          {"lr0", 0.001},
          {"lr_halving_period_epochs", 50},
          {"validation_interval", 5},
          {"overlap", 0.5},
          {"augment", {{"rotation", true}, {"flip", true}, {"contrast", true}}}};
}

const char* kind(const json& j) {
  if (j.is_object()) return "an object";
  if (j.is_boolean()) return "a boolean";
  if (j.is_number_integer() || j.is_number_unsigned()) return "an integer";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  return "a value";
}

bool compatible(const json& base, const json& user) {
  if (base.is_boolean()) return user.is_boolean();
  if (base.is_number_integer() || base.is_number_unsigned()) {
    return user.is_number_integer() || user.is_number_unsigned();
  }
  if (base.is_number()) return user.is_number();
  if (base.is_string()) return user.is_string();
  return false;
}

}  // namespace

json default_config(const std::string& command) {
  json c;
  if (command == "synth") {
    c = common("synth_out");
    c["train_count"] = 4;
    c["val_count"] = 0;
    c["test_count"] = 0;
    c["pixel_size_microns"] = 12.5;
    c["synth"] = {{"height", 64},         {"width", 64},
                  {"channels", 1},        {"vessel_count", 4},
                  {"min_width_px", 3},    {"max_width_px", 7},
                  {"artery_fraction", 0.5}, {"texture_seed", 0},
                  {"noise_level", 0.02},  {"margin_px", 2},
                  {"max_attempts", 500}};
  } else if (command == "train") {
    c = common("train_out");
    c["manifest"] = "";
    c["train_split"] = "train";
    c["val_split"] = "val";
    c["init_checkpoint"] = "";
    c["model"] = model_defaults();
    c["train"] = train_defaults();
    c["loss"] = {{"lambda1", 1.0}, {"lambda2", 1.0}, {"lambda3", 0.001}};
  } else if (command == "distill") {
    c = common("distill_out");
    c["manifest"] = "";
    c["train_split"] = "train";
    c["val_split"] = "val";
    c["teacher"] = "";
    c["finetune"] = false;
    c["finetune_train"] = train_defaults();
    c["student"] = model_defaults();
    c["student"]["num_classes"] = 2;
    c["student"]["aux_enabled"] = false;
    c["train"] = train_defaults();
    c["loss"] = {{"tau", 3.0}, {"lambda_d", 0.1}};
  } else if (command == "infer") {
    c = common("infer_out");
    c["checkpoint"] = "";
    c["input"] = "";
    c["patch_size"] = 256;
    c["overlap"] = 0.5;
  } else if (command == "widths") {
    c = common("widths_out");
    c["input"] = "";
    c["input_kind"] = "probability";
    c["reference"] = "";
    c["pixel_size_microns"] = 12.5;
  } else if (command == "eval") {
    c = common("eval_out");
    c["predictions"] = "";
    c["manifest"] = "";
    c["split"] = "";
  } else {
    throw InvalidArgument("unknown command '" + command + "'");
  }
  return c;
}

void merge_config(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw InvalidArgument("config" + (path.empty() ? "" : " key '" + path + "'") +
                          " must be an object");
  }
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_config(slot, it.value(), key);
    } else if (compatible(slot, it.value())) {
      slot = it.value();
    } else {
      throw InvalidArgument("config key '" + key + "' must be " + kind(slot) +
                            ", got " + kind(it.value()));
    }
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidArgument("--set expects key.path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::string rest = path;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos;) {
    parts.push_back(rest.substr(0, pos));
    rest = rest.substr(pos + 1);
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) throw InvalidArgument("--set: empty key in '" + path + "'");
    patch = json{{*it, patch}};
  }
  merge_config(config, patch);
}

}  // namespace segravir::cli
