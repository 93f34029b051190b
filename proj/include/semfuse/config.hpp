// Copyright 2026 The semfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON loaders for the encoder grid and augmentation configs. Missing keys keep
// their defaults; unknown keys are rejected so that typos do not pass silently.

#ifndef SEMFUSE__CONFIG_HPP_
#define SEMFUSE__CONFIG_HPP_

#include <initializer_list>
#include <string>
#include <string_view>

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include <json.hpp>
#endif

#include "semfuse/augmentation.hpp"
#include "semfuse/encoders.hpp"
#include "semfuse/errors.hpp"
#include "semfuse/kitti_io.hpp"

namespace semfuse::config
{

using Json = nlohmann::json;

namespace detail
{

inline void check_keys(const Json & j, std::string_view where, std::initializer_list<std::string_view> allowed)
{
  if (!j.is_object()) {
    throw InvalidConfig(std::string(where) + ": expected an object");
  }
  for (const auto & [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) {
      throw InvalidConfig(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const Json & j, const char * key, T & out)
{
  if (!j.contains(key)) return;
  try {
    out = j.at(key).template get<T>();
  } catch (const nlohmann::json::exception & e) {
    throw InvalidConfig(std::string(key) + ": " + e.what());
  }
}

inline void read_range(const Json & j, const char * key, encoders::AxisRange & r)
{
  if (!j.contains(key)) return;
  const auto & v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw InvalidConfig(std::string(key) + ": expected [min, max]");
  }
  r = {v[0].get<double>(), v[1].get<double>()};
}

template <typename T>
void read_per_class(const Json & j, const char * key, std::array<T, kNumKittiClasses> & out)
{
  if (!j.contains(key)) return;
  const auto & v = j.at(key);
  if (!v.is_object()) {
    throw InvalidConfig(std::string(key) + ": expected {class: value}");
  }
  for (const auto & [name, value] : v.items()) {
    const auto cls = class_from_name(name);
    if (!cls) {
      throw InvalidConfig(std::string(key) + ": unknown class '" + name + "'");
    }
    try {
      out[index_of(*cls)] = value.template get<T>();
    } catch (const nlohmann::json::exception & e) {
      throw InvalidConfig(std::string(key) + ": " + e.what());
    }
  }
}

inline Json parse(std::string_view text, std::string_view where)
{
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error & e) {
    throw InvalidConfig(std::string(where) + ": " + e.what());
  }
}

}  // namespace detail

inline encoders::GridConfig grid_config_from_json(const Json & j)
{
  using detail::read;
  using detail::read_range;
  encoders::GridConfig g;
  detail::check_keys(j, "grid config", {"pillar", "voxel", "cylinder", "bins", "seed"});
  if (j.contains("pillar")) {
    const auto & p = j.at("pillar");
    detail::check_keys(p, "pillar", {"x", "y", "resolution", "max_pillars", "max_points"});
    read_range(p, "x", g.pillar.x);
    read_range(p, "y", g.pillar.y);
    if (p.contains("resolution")) {
      const auto & r = p.at("resolution");
      if (r.is_number()) {
        g.pillar.resolution_x = g.pillar.resolution_y = r.get<double>();
      } else if (r.is_array() && r.size() == 2) {
        g.pillar.resolution_x = r[0].get<double>();
        g.pillar.resolution_y = r[1].get<double>();
      } else {
        throw InvalidConfig("pillar.resolution: expected a number or [rx, ry]");
      }
    }
    read(p, "max_pillars", g.pillar.max_pillars);
    read(p, "max_points", g.pillar.max_points);
  }
  if (j.contains("voxel")) {
    const auto & v = j.at("voxel");
    detail::check_keys(v, "voxel", {"x", "y", "z", "size", "max_voxels", "max_points", "class_max_points"});
    read_range(v, "x", g.voxel.x);
    read_range(v, "y", g.voxel.y);
    read_range(v, "z", g.voxel.z);
    if (v.contains("size")) {
      const auto & s = v.at("size");
      if (!s.is_array() || s.size() != 3) throw InvalidConfig("voxel.size: expected [sx, sy, sz]");
      g.voxel.size_x = s[0].get<double>();
      g.voxel.size_y = s[1].get<double>();
      g.voxel.size_z = s[2].get<double>();
    }
    read(v, "max_voxels", g.voxel.max_voxels);
    read(v, "max_points", g.voxel.max_points);
    detail::read_per_class(v, "class_max_points", g.voxel.class_max_points);
  }
  if (j.contains("cylinder")) {
    const auto & c = j.at("cylinder");
    detail::check_keys(c, "cylinder", {"rho", "z", "rho_resolution", "z_resolution", "phi_bins"});
    read_range(c, "rho", g.cylinder.rho);
    read_range(c, "z", g.cylinder.z);
    read(c, "rho_resolution", g.cylinder.rho_resolution);
    read(c, "z_resolution", g.cylinder.z_resolution);
    read(c, "phi_bins", g.cylinder.phi_bins);
  }
  if (j.contains("bins")) {
    const auto & b = j.at("bins");
    detail::check_keys(b, "bins", {"search_range", "bin_size"});
    read(b, "search_range", g.bins.search_range);
    read(b, "bin_size", g.bins.bin_size);
  }
  read(j, "seed", g.seed);
  g.validate();
  return g;
}

inline encoders::GridConfig parse_grid_config(std::string_view text)
{
  return grid_config_from_json(detail::parse(text, "grid config"));
}

inline augmentation::AugmentConfig augment_config_from_json(const Json & j)
{
  augmentation::AugmentConfig a;
  detail::check_keys(
    j, "augment config",
    {"rotation", "scale", "flip_probability", "sample_counts", "box_rotation", "box_translation_sigma", "seed"});
  encoders::AxisRange rot{a.rotation_min, a.rotation_max};
  encoders::AxisRange sc{a.scale_min, a.scale_max};
  detail::read_range(j, "rotation", rot);
  detail::read_range(j, "scale", sc);
  a.rotation_min = rot.min;
  a.rotation_max = rot.max;
  a.scale_min = sc.min;
  a.scale_max = sc.max;
  detail::read(j, "flip_probability", a.flip_probability);
  detail::read_per_class(j, "sample_counts", a.sample_counts);
  detail::read(j, "box_rotation", a.box_rotation);
  detail::read(j, "box_translation_sigma", a.box_translation_sigma);
  detail::read(j, "seed", a.seed);
  a.validate();
  return a;
}

inline augmentation::AugmentConfig parse_augment_config(std::string_view text)
{
  return augment_config_from_json(detail::parse(text, "augment config"));
}

/// A config that leaves every scene untouched.
inline augmentation::AugmentConfig identity_augment_config()
{
  augmentation::AugmentConfig a;
  a.rotation_min = a.rotation_max = 0.0;
  a.scale_min = a.scale_max = 1.0;
  a.flip_probability = 0.0;
  a.sample_counts = {0, 0, 0, 0};
  a.box_rotation = 0.0;
  a.box_translation_sigma = 0.0;
  return a;
}

}  // namespace semfuse::config

#endif  // SEMFUSE__CONFIG_HPP_
