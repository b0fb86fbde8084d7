#include "bharnet/synthgen.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "bharnet/errors.hpp"
#include "bharnet/rng.hpp"

namespace bharnet::synth {

namespace {

using Vec3 = std::array<double, 3>;
constexpr double kPi = std::numbers::pi;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// Rotation about the x axis (axis=0) or the z axis (axis=2).
Vec3 rotate(const Vec3& p, int axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  if (axis == 0) return {p[0], c * p[1] - s * p[2], s * p[1] + c * p[2]};
  return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

// NTU rest pose, y up, roughly unit body height.
const std::array<Vec3, layout::kBodyJoints> kRestPose = {{
    {0.0, 0.0, 0.0},        // 0 base of spine
    {0.0, 0.25, 0.0},       // 1 mid spine
    {0.0, 0.52, 0.0},       // 2 neck
    {0.0, 0.62, 0.0},       // 3 head
    {-0.18, 0.45, 0.0},     // 4 left shoulder
    {-0.20, 0.20, 0.0},     // 5 left elbow
    {-0.20, 0.00, 0.05},    // 6 left wrist
    {-0.20, -0.05, 0.05},   // 7 left hand
    {0.18, 0.45, 0.0},      // 8 right shoulder
    {0.20, 0.20, 0.0},      // 9 right elbow
    {0.20, 0.00, 0.05},     // 10 right wrist
    {0.20, -0.05, 0.05},    // 11 right hand
    {-0.10, 0.0, 0.0},      // 12 left hip
    {-0.10, -0.45, 0.0},    // 13 left knee
    {-0.10, -0.85, 0.0},    // 14 left ankle
    {-0.10, -0.88, 0.10},   // 15 left foot
    {0.10, 0.0, 0.0},       // 16 right hip
    {0.10, -0.45, 0.0},     // 17 right knee
    {0.10, -0.85, 0.0},     // 18 right ankle
    {0.10, -0.88, 0.10},    // 19 right foot
    {0.0, 0.45, 0.0},       // 20 spine at shoulders
    {-0.20, -0.10, 0.05},   // 21 left hand tip
    {-0.17, -0.06, 0.07},   // 22 left thumb
    {0.20, -0.10, 0.05},    // 23 right hand tip
    {0.17, -0.06, 0.07},    // 24 right thumb
}};

struct ArmChain {
  int shoulder, elbow, wrist;
  std::array<int, 3> forearm_extras;  // hand, hand tip, thumb
  double side;                        // -1 left, +1 right
};
const ArmChain kLeftArm{4, 5, 6, {7, 21, 22}, -1.0};
const ArmChain kRightArm{8, 9, 10, {11, 23, 24}, 1.0};

struct Jitter {
  double amplitude = 1.0;
  double phase = 0.0;
  Vec3 offset{0.0, 0.0, 0.0};
  double hand_phase = 0.0;
};

// Arm motion of body motif m: which arms move, about which axis, how fast.
struct BodyMotif {
  bool left, right;
  int axis;
  double cycles, amplitude, phase;
};

BodyMotif body_motif(int m) {
  BodyMotif b;
  b.left = m % 3 != 1;
  b.right = m % 3 != 2;
  b.axis = m % 2 == 0 ? 0 : 2;
  b.cycles = 1.0 + 0.75 * m;
  b.amplitude = 0.9;
  b.phase = 0.7 * m;
  return b;
}

// Local hand geometry (left/right mirrored on x). Fingers hang along -y,
// palm faces +z. Returns the 21 joints for the given per-finger curls.
std::array<Vec3, layout::kHandJoints> hand_pose(const std::array<double, 5>& curl, double side) {
  static const std::array<Vec3, 5> base = {{
      {-0.020, -0.020, 0.010},  // thumb CMC
      {-0.018, -0.080, 0.0},    // index MCP
      {-0.006, -0.085, 0.0},    // middle MCP
      {0.006, -0.080, 0.0},     // ring MCP
      {0.018, -0.072, 0.0},     // pinky MCP
  }};
  static const std::array<double, 5> scale = {0.8, 1.0, 1.1, 1.0, 0.8};
  static const std::array<double, 3> seg = {0.035, 0.025, 0.020};

  std::array<Vec3, layout::kHandJoints> out{};
  out[0] = {0.0, 0.0, 0.0};
  for (int f = 0; f < 5; ++f) {
    Vec3 p = base[f];
    out[1 + 4 * f] = p;
    for (int k = 1; k <= 3; ++k) {
      const double a = curl[f] * k;
      Vec3 d = {0.0, -std::cos(a), std::sin(a)};
      if (f == 0) d = {0.5 * std::sin(a) - 0.5, -std::cos(a), 0.5 * std::sin(a)};
      const double len = seg[k - 1] * scale[f];
      p = {p[0] + len * d[0], p[1] + len * d[1], p[2] + len * d[2]};
      out[1 + 4 * f + k] = p;
    }
  }
  for (auto& q : out) q[0] *= side;
  return out;
}

// Per-finger curl of hand motif h at normalized time u in [0, 1].
std::array<double, 5> finger_curls(int h, double u, double phase) {
  std::array<double, 5> c{};
  const double speed = 1.0 + static_cast<double>(h / 3);
  switch (h % 3) {
    case 0: {  // whole-hand clench
      const double e = 0.5 - 0.5 * std::cos(2.0 * kPi * 2.0 * speed * u + phase);
      for (int f = 0; f < 5; ++f) c[f] = 0.1 + 1.2 * e;
      break;
    }
    case 1: {  // pointing with a tapping index finger
      const double e = 0.5 - 0.5 * std::cos(2.0 * kPi * 4.0 * speed * u + phase);
      c = {0.9, 0.05 + 0.35 * e, 1.35, 1.35, 1.35};
      break;
    }
    default: {  // thumb-index pinch, remaining fingers held straight
      const double e = 0.5 - 0.5 * std::cos(2.0 * kPi * 3.0 * speed * u + phase);
      c = {0.3 + 0.7 * e, 0.3 + 0.8 * e, 0.1, 0.1, 0.1};
      break;
    }
  }
  return c;
}

SkeletonSequence render(const SynthConfig& cfg, int label, const Jitter& j, std::string id) {
  const auto topo = build_combined_topology();
  auto seq = SkeletonSequence::zeros(std::move(id), label, cfg.frames, topo);
  const BodyMotif bm = body_motif(body_motif_of(cfg, label));
  const int hm = hand_motif_of(cfg, label);

  for (int t = 0; t < cfg.frames; ++t) {
    const double u = cfg.frames > 1 ? static_cast<double>(t) / (cfg.frames - 1) : 0.0;
    std::array<Vec3, layout::kBodyJoints> body = kRestPose;
    std::array<double, 2> forearm_angle{0.0, 0.0};

    const double wave = std::sin(2.0 * kPi * bm.cycles * u + bm.phase + j.phase);
    for (const ArmChain* arm : {&kLeftArm, &kRightArm}) {
      const bool moving = arm->side < 0 ? bm.left : bm.right;
      if (!moving) continue;
      const double shoulder = j.amplitude * bm.amplitude * wave * (bm.axis == 0 ? -1.0 : arm->side);
      const double elbow = 0.5 * j.amplitude * bm.amplitude * (1.0 + wave) * -1.0;
      const Vec3 s = kRestPose[arm->shoulder];
      // Whole arm swings about the shoulder, forearm flexes further about the elbow.
      auto swing = [&](const Vec3& p) { return add(s, rotate(sub(p, s), bm.axis, shoulder)); };
      const Vec3 elbow_pos = swing(kRestPose[arm->elbow]);
      auto flex = [&](const Vec3& p) {
        return add(elbow_pos, rotate(sub(swing(p), elbow_pos), 0, elbow));
      };
      body[arm->elbow] = elbow_pos;
      body[arm->wrist] = flex(kRestPose[arm->wrist]);
      for (int e : arm->forearm_extras) body[e] = flex(kRestPose[e]);
      forearm_angle[arm->side < 0 ? 0 : 1] = bm.axis == 0 ? shoulder + elbow : 0.0;
    }

    for (int v = 0; v < layout::kBodyJoints; ++v) {
      const Vec3 p = add(body[v], j.offset);
      for (int c = 0; c < 3; ++c) seq.at(c, t, v) = p[c];
      seq.set_valid(t, v, true);
    }

    const auto curls = finger_curls(hm, u, j.hand_phase);
    for (int h = 0; h < 2; ++h) {
      const double side = h == 0 ? -1.0 : 1.0;
      const int wrist = h == 0 ? layout::kLeftWrist : layout::kRightWrist;
      const int offset = h == 0 ? layout::kLeftHandOffset : layout::kRightHandOffset;
      const auto local = hand_pose(curls, side);
      const Vec3 root = add(body[wrist], j.offset);
      for (int k = 0; k < layout::kHandJoints; ++k) {
        const Vec3 p = add(root, rotate(local[k], 0, forearm_angle[h]));
        for (int c = 0; c < 3; ++c) seq.at(c, t, offset + k) = p[c];
        seq.set_valid(t, offset + k, true);
      }
    }
  }
  return seq;
}

bool is_hand_joint(const SkeletonSequence& seq, int v) {
  if (seq.topology_name == "combined") return v >= layout::kLeftHandOffset && v < layout::kDummyOffset;
  return seq.topology_name == "hand" || seq.topology_name == "hands";
}

}  // namespace

void SynthConfig::validate() const {
  if (body_motifs < 1 || hand_motifs < 1) throw ConfigError("motif counts must be >= 1");
  if (class_count() < 2) throw ConfigError("need at least two classes");
  if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
  if (frames < 2) throw ConfigError("synthetic sequences need T >= 2");
  if (!(sigma_body >= 0.0) || !(sigma_hand >= 0.0)) throw ConfigError("noise levels must be >= 0");
  if (!(hand_dropout_rate >= 0.0 && hand_dropout_rate < 1.0)) throw ConfigError("hand_dropout_rate must lie in [0, 1)");
}

int body_motif_of(const SynthConfig& cfg, int label) { return label / cfg.hand_motifs; }
int hand_motif_of(const SynthConfig& cfg, int label) { return label % cfg.hand_motifs; }

SkeletonSequence class_template(const SynthConfig& cfg, int label) {
  cfg.validate();
  if (label < 0 || label >= cfg.class_count()) throw InputError("class_template: label out of range");
  return render(cfg, label, Jitter{}, "template-" + std::to_string(label));
}

DatasetSplit generate_dataset(const SynthConfig& cfg, SplitTag tag) {
  cfg.validate();
  DatasetSplit split;
  split.class_count = cfg.class_count();
  split.split_tag = tag;
  const std::uint64_t split_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(tag) + 1);
  const auto topo = build_combined_topology();

  for (int label = 0; label < cfg.class_count(); ++label) {
    for (int s = 0; s < cfg.samples_per_class; ++s) {
      const auto index = static_cast<std::uint64_t>(label * cfg.samples_per_class + s);
      std::mt19937_64 rng(derive_seed(split_seed, index));
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      Jitter j;
      j.amplitude = 1.0 + 0.15 * unit(rng);
      j.phase = 0.3 * unit(rng);
      j.offset = {0.1 * unit(rng), 0.02 * unit(rng), 0.1 * unit(rng)};
      j.hand_phase = 0.5 * unit(rng);

      auto seq = render(cfg, label, j,
                        std::string(to_string(tag)) + "-" + std::to_string(cfg.seed) + "-" + std::to_string(index));
      std::normal_distribution<double> body_noise(0.0, 1.0);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      for (int t = 0; t < seq.frames; ++t) {
        for (int v = 0; v < seq.joints; ++v) {
          if (topo.is_dummy(v)) continue;
          const double sigma = is_hand_joint(seq, v) ? cfg.sigma_hand : cfg.sigma_body;
          for (int c = 0; c < 3; ++c) seq.at(c, t, v) += sigma * body_noise(rng);
        }
        if (coin(rng) < cfg.hand_dropout_rate)
          for (int v = layout::kLeftHandOffset; v < layout::kDummyOffset; ++v) seq.mask(t, v);
      }
      split.sequences.push_back(std::move(seq));
    }
  }
  return split;
}

DatasetSplit inject_hand_noise(const DatasetSplit& split, double sigma, double dropout_rate, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("hand noise sigma must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("hand dropout rate must lie in [0, 1)");
  DatasetSplit out = split;
  for (std::size_t i = 0; i < out.sequences.size(); ++i) {
    auto& seq = out.sequences[i];
    std::mt19937_64 rng(derive_seed(seed, i));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int t = 0; t < seq.frames; ++t) {
      const bool drop = coin(rng) < dropout_rate;
      for (int v = 0; v < seq.joints; ++v) {
        if (!is_hand_joint(seq, v) || !seq.is_valid(t, v)) continue;
        if (drop) {
          seq.mask(t, v);
          continue;
        }
        if (sigma > 0.0)
          for (int c = 0; c < 3; ++c) seq.at(c, t, v) += sigma * noise(rng);
      }
    }
  }
  return out;
}

}  // namespace bharnet::synth
