#include "hmpc/morphology.hpp"

#include <yaml-cpp/yaml.h>

#include <cctype>
#include <cmath>
#include <sstream>

namespace hmpc {

namespace {

constexpr double kModuleLength = 0.15;  // m

JointModule module(const Eigen::Vector3d& axis, const Eigen::Vector3d& offset,
                   const Eigen::Matrix3d& pre_rot = Eigen::Matrix3d::Identity()) {
  JointModule m;
  m.axis = axis;
  m.parent_transform = {pre_rot, offset};
  return m;
}

ChainModel make_chain(const std::vector<char>& axes,
                      const std::vector<Eigen::Vector3d>& offsets,
                      const Eigen::Vector3d& tool_offset) {
  ChainModel c;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    Eigen::Vector3d a;
    switch (axes[i]) {
      case 'x': a = Eigen::Vector3d::UnitX(); break;
      case 'y': a = Eigen::Vector3d::UnitY(); break;
      default: a = Eigen::Vector3d::UnitZ(); break;
    }
    c.modules.push_back(module(a, offsets[i]));
  }
  c.tool_transform = {Eigen::Matrix3d::Identity(), tool_offset};
  return c;
}

std::vector<Eigen::Vector3d> uniform_offsets(std::size_t n) {
  return std::vector<Eigen::Vector3d>(n, Eigen::Vector3d(0, 0, kModuleLength));
}

std::vector<NamedChain> build_catalog() {
  std::vector<NamedChain> cat;
  const Eigen::Vector3d up(0, 0, kModuleLength);
  // A: 4 DoF yaw + three pitches.
  cat.push_back({"A", make_chain({'z', 'y', 'y', 'y'}, uniform_offsets(4), up)});
  // B: 5 DoF with a forearm roll.
  cat.push_back(
      {"B", make_chain({'z', 'y', 'y', 'z', 'y'}, uniform_offsets(5), up)});
  // C: 5 DoF, pitch-led ordering.
  cat.push_back(
      {"C", make_chain({'y', 'z', 'y', 'y', 'z'}, uniform_offsets(5), up)});
  // D: 6 DoF with an offset wrist.
  cat.push_back(
      {"D", make_chain({'z', 'y', 'y', 'z', 'y', 'y'}, uniform_offsets(6), up)});
  // E: 6 DoF anthropomorphic with a spherical wrist (last three axes
  // intersect in one point).
  std::vector<Eigen::Vector3d> off_e = uniform_offsets(6);
  off_e[4] = Eigen::Vector3d::Zero();
  off_e[5] = Eigen::Vector3d::Zero();
  cat.push_back({"E", make_chain({'z', 'y', 'y', 'z', 'y', 'z'}, off_e, up)});
  return cat;
}

double node_double(const YAML::Node& n, const char* field,
                   std::vector<std::string>& errs) {
  try {
    return n.as<double>();
  } catch (const YAML::Exception&) {
    errs.push_back(std::string(field) + ": expected a number");
    return 0.0;
  }
}

Eigen::Vector3d node_vec3(const YAML::Node& n, const char* field,
                          std::vector<std::string>& errs) {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  if (!n.IsSequence() || n.size() != 3) {
    errs.push_back(std::string(field) + ": expected a 3-element sequence");
    return v;
  }
  for (int i = 0; i < 3; ++i) v(i) = node_double(n[i], field, errs);
  return v;
}

Eigen::Matrix3d node_axis_angle(const YAML::Node& n, const char* field,
                                std::vector<std::string>& errs) {
  if (!n.IsMap() || !n["axis"] || !n["angle"]) {
    errs.push_back(std::string(field) + ": expected {axis: [..], angle: ..}");
    return Eigen::Matrix3d::Identity();
  }
  Eigen::Vector3d axis = node_vec3(n["axis"], field, errs);
  const double angle = node_double(n["angle"], field, errs);
  const double norm = axis.norm();
  if (norm < 1e-12) {
    errs.push_back(std::string(field) + ": zero-norm rotation axis");
    return Eigen::Matrix3d::Identity();
  }
  return Eigen::AngleAxisd(angle, axis / norm).toRotationMatrix();
}

// Axis spec: "x", "-y", ... or an explicit 3-vector. Vectors are silently
// normalized only when within 1e-6 of unit length.
Eigen::Vector3d parse_axis(const YAML::Node& n, const std::string& where,
                           std::vector<std::string>& errs) {
  if (n.IsScalar()) {
    std::string s = n.as<std::string>();
    double sign = 1.0;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
      sign = (s[0] == '-') ? -1.0 : 1.0;
      s = s.substr(1);
    }
    if (s == "x") return sign * Eigen::Vector3d::UnitX();
    if (s == "y") return sign * Eigen::Vector3d::UnitY();
    if (s == "z") return sign * Eigen::Vector3d::UnitZ();
    errs.push_back(where + ": unknown axis name '" + n.as<std::string>() + "'");
    return Eigen::Vector3d::UnitZ();
  }
  Eigen::Vector3d v = node_vec3(n, where.c_str(), errs);
  const double norm = v.norm();
  if (std::abs(norm - 1.0) > 1e-6) {
    std::ostringstream os;
    os << where << ": axis norm " << norm
       << " deviates from 1 by more than 1e-6";
    errs.push_back(os.str());
    return Eigen::Vector3d::UnitZ();
  }
  return v / norm;
}

RigidTransform parse_transform(const YAML::Node& n, const std::string& where,
                               std::vector<std::string>& errs) {
  RigidTransform t;
  if (!n) return t;
  if (n["offset"]) t.p = node_vec3(n["offset"], where.c_str(), errs);
  if (n["pre_rotation"])
    t.R = node_axis_angle(n["pre_rotation"], where.c_str(), errs);
  return t;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const std::vector<NamedChain>& builtin_morphologies() {
  static const std::vector<NamedChain> catalog = build_catalog();
  return catalog;
}

const ChainModel& find_morphology(const std::string& name) {
  std::string up = name;
  for (auto& ch : up) ch = static_cast<char>(std::toupper(ch));
  for (const auto& nc : builtin_morphologies()) {
    if (nc.name == up) return nc.chain;
  }
  throw ConfigError("unknown builtin morphology '" + name + "'");
}

ChainModel load_chain(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << "chain config parse error at line " << e.mark.line + 1 << ", column "
       << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(os.str());
  }
  std::vector<std::string> errs;
  if (!root.IsMap()) {
    throw ConfigError("chain config: top level must be a mapping");
  }

  ChainModel chain;
  chain.base_transform = parse_transform(root["base"], "base", errs);
  chain.tool_transform = parse_transform(root["tool"], "tool", errs);

  const YAML::Node mods = root["modules"];
  if (!mods || !mods.IsSequence() || mods.size() == 0) {
    errs.push_back("modules: expected a non-empty sequence");
  } else {
    for (std::size_t i = 0; i < mods.size(); ++i) {
      const std::string where = "modules[" + std::to_string(i) + "]";
      const YAML::Node m = mods[i];
      JointModule jm;
      if (!m["axis"]) {
        errs.push_back(where + ": missing axis");
      } else {
        jm.axis = parse_axis(m["axis"], where + ".axis", errs);
      }
      if (m["offset"]) {
        jm.parent_transform.p =
            node_vec3(m["offset"], (where + ".offset").c_str(), errs);
      }
      if (m["pre_rotation"]) {
        jm.parent_transform.R = node_axis_angle(
            m["pre_rotation"], (where + ".pre_rotation").c_str(), errs);
      }
      if (const YAML::Node lim = m["limits"]) {
        if (const YAML::Node ql = lim["q"]) {
          if (ql.IsSequence() && ql.size() == 2) {
            jm.q_lower = node_double(ql[0], (where + ".limits.q").c_str(), errs);
            jm.q_upper = node_double(ql[1], (where + ".limits.q").c_str(), errs);
          } else {
            errs.push_back(where + ".limits.q: expected [lower, upper]");
          }
        }
        if (lim["qd"])
          jm.qd_limit = node_double(lim["qd"], (where + ".limits.qd").c_str(), errs);
        if (lim["qdd"])
          jm.qdd_limit =
              node_double(lim["qdd"], (where + ".limits.qdd").c_str(), errs);
      }
      if (jm.q_lower >= jm.q_upper) {
        errs.push_back(where + ".limits.q: lower >= upper");
      }
      if (!(jm.qd_limit > 0.0)) errs.push_back(where + ".limits.qd: must be > 0");
      if (!(jm.qdd_limit > 0.0))
        errs.push_back(where + ".limits.qdd: must be > 0");
      chain.modules.push_back(jm);
    }
  }

  for (const auto& v : validate_chain(chain)) errs.push_back(v);
  // De-duplicate messages produced by both the field checks and the
  // model-level validation.
  std::vector<std::string> unique;
  for (const auto& e : errs) {
    bool seen = false;
    for (const auto& u : unique) seen = seen || u == e;
    if (!seen) unique.push_back(e);
  }
  if (!unique.empty()) {
    std::ostringstream os;
    os << "chain config invalid (" << unique.size() << " violation"
       << (unique.size() == 1 ? "" : "s") << "):";
    for (const auto& e : unique) os << "\n  - " << e;
    throw ConfigError(os.str(), unique);
  }
  return chain;
}

std::string save_chain(const ChainModel& chain, const std::string& name) {
  std::ostringstream os;
  auto emit_transform = [&](const RigidTransform& t, const char* key,
                            int indent) {
    const std::string pad(indent, ' ');
    os << pad << key << ":\n";
    os << pad << "  offset: [" << fmt(t.p(0)) << ", " << fmt(t.p(1)) << ", "
       << fmt(t.p(2)) << "]\n";
    const Eigen::AngleAxisd aa(t.R);
    if (std::abs(aa.angle()) > 0.0) {
      os << pad << "  pre_rotation: {axis: [" << fmt(aa.axis()(0)) << ", "
         << fmt(aa.axis()(1)) << ", " << fmt(aa.axis()(2))
         << "], angle: " << fmt(aa.angle()) << "}\n";
    }
  };
  os << "name: " << name << "\n";
  emit_transform(chain.base_transform, "base", 0);
  emit_transform(chain.tool_transform, "tool", 0);
  os << "modules:\n";
  for (const auto& m : chain.modules) {
    os << "  - axis: [" << fmt(m.axis(0)) << ", " << fmt(m.axis(1)) << ", "
       << fmt(m.axis(2)) << "]\n";
    os << "    offset: [" << fmt(m.parent_transform.p(0)) << ", "
       << fmt(m.parent_transform.p(1)) << ", " << fmt(m.parent_transform.p(2))
       << "]\n";
    const Eigen::AngleAxisd aa(m.parent_transform.R);
    if (std::abs(aa.angle()) > 0.0) {
      os << "    pre_rotation: {axis: [" << fmt(aa.axis()(0)) << ", "
         << fmt(aa.axis()(1)) << ", " << fmt(aa.axis()(2))
         << "], angle: " << fmt(aa.angle()) << "}\n";
    }
    os << "    limits: {q: [" << fmt(m.q_lower) << ", " << fmt(m.q_upper)
       << "], qd: " << fmt(m.qd_limit) << ", qdd: " << fmt(m.qdd_limit)
       << "}\n";
  }
  return os.str();
}

std::vector<std::string> validate_chain(const ChainModel& chain) {
  std::vector<std::string> v;
  if (chain.modules.empty()) {
    v.push_back("chain has no modules");
  }
  auto check_rotation = [&](const Eigen::Matrix3d& R, const std::string& what) {
    const double ortho =
        (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-12 || std::abs(R.determinant() - 1.0) > 1e-12) {
      v.push_back(what + ": rotation not orthonormal with det +1");
    }
  };
  check_rotation(chain.base_transform.R, "base");
  check_rotation(chain.tool_transform.R, "tool");
  for (std::size_t i = 0; i < chain.modules.size(); ++i) {
    const auto& m = chain.modules[i];
    const std::string where = "modules[" + std::to_string(i) + "]";
    if (std::abs(m.axis.norm() - 1.0) > 1e-12) {
      v.push_back(where + ": axis is not unit norm");
    }
    check_rotation(m.parent_transform.R, where);
    if (m.q_lower >= m.q_upper) v.push_back(where + ".limits.q: lower >= upper");
    if (!(m.qd_limit > 0.0)) v.push_back(where + ".limits.qd: must be > 0");
    if (!(m.qdd_limit > 0.0)) v.push_back(where + ".limits.qdd: must be > 0");
  }
  return v;
}

}  // namespace hmpc
