#include "vseg/augment.hpp"

#include <cstdio>
#include <sstream>

#include "vseg/error.hpp"
#include "vseg/imageops.hpp"

namespace vseg {

namespace {

TransformSpec id_t() { return {}; }
TransformSpec rot(double angle, bool mirror = false) {
  return {TransformSpec::Kind::rotate, angle, 1.0, mirror};
}
TransformSpec flip_h_t() { return {TransformSpec::Kind::flip_h, 0.0, 1.0, false}; }
TransformSpec flip_v_t() { return {TransformSpec::Kind::flip_v, 0.0, 1.0, false}; }
TransformSpec scl(double factor) {
  return {TransformSpec::Kind::scale, 0.0, factor, false};
}

// Shared by DRIVE and CHASE_DB1.
std::vector<TransformSpec> core12() {
  return {id_t(),   rot(90),  rot(180), rot(270),       flip_h_t(),      flip_v_t(),
          scl(0.8), scl(1.2), rot(90, true), rot(270, true), rot(45, true),
          rot(135, true)};
}

}  // namespace

std::string TransformSpec::name() const {
  std::string base;
  switch (kind) {
    case Kind::identity: base = "identity"; break;
    case Kind::rotate: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "rot%g", angle);
      base = buf;
      break;
    }
    case Kind::flip_h: base = "flip_h"; break;
    case Kind::flip_v: base = "flip_v"; break;
    case Kind::scale: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "scale%g", factor);
      base = buf;
      break;
    }
  }
  return mirror ? base + "+flip_h" : base;
}

AugmentPlan default_plan(Dataset dataset) {
  AugmentPlan plan;
  plan.dataset = dataset;
  plan.version = "v1";
  switch (dataset) {
    case Dataset::DRIVE:
      plan.transforms = core12();
      plan.transforms.push_back(rot(225, true));
      break;
    case Dataset::CHASE_DB1:
      plan.transforms = core12();
      for (double a : {45.0, 135.0, 225.0, 315.0}) plan.transforms.push_back(rot(a));
      break;
    case Dataset::STARE:
      // identity + every 18 degrees, then the same twenty mirrored.
      plan.transforms.push_back(id_t());
      for (int i = 1; i < 20; ++i) plan.transforms.push_back(rot(18.0 * i));
      plan.transforms.push_back(flip_h_t());
      for (int i = 1; i < 20; ++i) plan.transforms.push_back(rot(18.0 * i, true));
      break;
    case Dataset::SYNTHETIC:
      // Synthetic corpora are tiny, so they get the densest rotation-mirror
      // grid of the family: every 15 degrees, plain and mirrored (48 total).
      plan.transforms.push_back(id_t());
      for (int i = 1; i < 24; ++i) plan.transforms.push_back(rot(15.0 * i));
      plan.transforms.push_back(flip_h_t());
      for (int i = 1; i < 24; ++i) plan.transforms.push_back(rot(15.0 * i, true));
      break;
  }
  return plan;
}

namespace {

Tensor transform_map(const Tensor& t, const TransformSpec& spec, bool nearest) {
  Tensor out;
  switch (spec.kind) {
    case TransformSpec::Kind::identity: out = t; break;
    case TransformSpec::Kind::rotate:
      out = rotate_about_center(t, spec.angle, nearest);
      break;
    case TransformSpec::Kind::flip_h: out = flip_horizontal(t); break;
    case TransformSpec::Kind::flip_v: out = flip_vertical(t); break;
    case TransformSpec::Kind::scale:
      out = scale_about_center(t, spec.factor, nearest);
      break;
  }
  if (spec.mirror) out = flip_horizontal(out);
  return out;
}

}  // namespace

FundusSample apply_transform(const FundusSample& s, const TransformSpec& t) {
  if (t.kind == TransformSpec::Kind::rotate && (t.angle <= 0.0 || t.angle >= 360.0))
    throw structural_error("rotation angle must lie in (0, 360)");
  if (t.kind == TransformSpec::Kind::scale && !(t.factor > 0.0))
    throw structural_error("scale factor must be positive");
  FundusSample out;
  out.id = s.id;
  out.source_dataset = s.source_dataset;
  out.image = transform_map(s.image, t, false);
  out.truth = transform_map(s.truth, t, true);
  out.fov = transform_map(s.fov, t, true);
  return out;
}

std::vector<FundusSample> augment_set(const std::vector<FundusSample>& split,
                                      const AugmentPlan& plan) {
  std::vector<FundusSample> out;
  out.reserve(split.size() * plan.transforms.size());
  for (const auto& s : split)
    for (std::size_t ti = 0; ti < plan.transforms.size(); ++ti) {
      FundusSample a = apply_transform(s, plan.transforms[ti]);
      char buf[16];
      std::snprintf(buf, sizeof buf, "_t%02zu", ti);
      a.id += buf;
      out.push_back(std::move(a));
    }
  return out;
}

std::string plan_csv(const AugmentPlan& plan) {
  std::ostringstream o;
  o << "index,kind,angle,factor,mirror\n";
  for (std::size_t i = 0; i < plan.transforms.size(); ++i) {
    const auto& t = plan.transforms[i];
    const char* kind = "";
    switch (t.kind) {
      case TransformSpec::Kind::identity: kind = "identity"; break;
      case TransformSpec::Kind::rotate: kind = "rotate"; break;
      case TransformSpec::Kind::flip_h: kind = "flip_h"; break;
      case TransformSpec::Kind::flip_v: kind = "flip_v"; break;
      case TransformSpec::Kind::scale: kind = "scale"; break;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%s,%g,%g,%d\n", i, kind, t.angle, t.factor,
                  t.mirror ? 1 : 0);
    o << buf;
  }
  return o.str();
}

}  // namespace vseg
