#include "vseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vseg/error.hpp"
#include "vseg/rng.hpp"
#include "vseg/util.hpp"

namespace vseg {

namespace {

constexpr char kCkptMagic[8] = {'V', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> default_depth(Backbone b) {
  // vgg: convs per group mirroring the classification net's conv1..conv4
  // (conv5 appended only for the five-side variant); resnet: one stem conv
  // then the res2/res3/res4 bottleneck block counts.
  return b == Backbone::vgg_groups ? std::vector<int>{2, 2, 3, 3}
                                   : std::vector<int>{1, 3, 4, 6};
}

}  // namespace

std::string ModelGraph::structure_string() const {
  std::ostringstream o;
  std::vector<int> depth;
  for (const auto& g : groups) depth.push_back(static_cast<int>(g.blocks.size()));
  o << "graph-v1;backbone=" << vseg::to_string(backbone) << ";M=" << num_sides
    << ";bt=" << bottom_top << ";tb=" << top_bottom << ";taps=" << tap_channels
    << ";fuse=" << vseg::to_string(fuse_on) << ";center=" << input_center
    << ";scale=" << input_scale
    << ";in=" << in_channels << ";strides=" << join_ints(group_strides)
    << ";widths=" << join_ints(channel_widths) << ";depth=" << join_ints(depth);
  return o.str();
}

std::uint64_t ModelGraph::structure_hash() const { return fnv1a64(structure_string()); }

ad::VarPtr Params::find(const std::string& name) const {
  for (const auto& [n, v] : entries)
    if (n == name) return v;
  return nullptr;
}

void Params::zero_grad() {
  for (auto& [n, v] : entries) v->zero_grad();
}

std::size_t Params::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries) n += v->value.size();
  return n;
}

ModelGraph build_graph(const ExperimentConfig& cfg) {
  ModelGraph g;
  g.backbone = cfg.backbone;
  g.variant = cfg.variant;
  g.tap_channels = cfg.tap_channels;
  g.fuse_on = cfg.fuse_on;
  g.input_center = cfg.input_center;
  g.input_scale = cfg.input_scale;
  g.in_channels = dataset_channels(cfg);

  switch (cfg.variant) {
    case Variant::HED:
      g.num_sides = 5;
      g.bottom_top = g.top_bottom = false;
      break;
    case Variant::DSN:
      g.num_sides = 4;
      g.bottom_top = g.top_bottom = false;
      break;
    case Variant::BS_DSN:
      g.num_sides = 4;
      g.bottom_top = true;
      g.top_bottom = false;
      break;
    case Variant::BTS_DSN:
      g.num_sides = 4;
      g.bottom_top = g.top_bottom = true;
      break;
  }
  if (g.variant == Variant::HED && g.backbone == Backbone::resnet_groups)
    throw config_error(
        "HED needs five backbone groups; the resnet-style backbone has no fifth "
        "group (its deepest stage is dropped)");
  if (g.top_bottom && g.num_sides != 4)
    throw config_error("the top-bottom connection requires the 4-side graph");
  if (g.tap_channels < 1) throw config_error("tap_channels must be >= 1");
  if (!(g.input_scale > 0.0)) throw config_error("input_scale must be > 0");

  const int m = g.num_sides;
  g.group_strides = g.backbone == Backbone::vgg_groups ? std::vector<int>{1, 2, 4, 8}
                                                       : std::vector<int>{2, 4, 8, 16};
  if (m == 5) g.group_strides.push_back(16);

  g.channel_widths = cfg.channel_widths;
  if (static_cast<int>(g.channel_widths.size()) == 4 && m == 5)
    g.channel_widths.push_back(g.channel_widths.back());
  if (static_cast<int>(g.channel_widths.size()) != m)
    throw config_error("channel_widths needs one width per backbone group");
  for (int w : g.channel_widths)
    if (w < 1) throw config_error("channel widths must be >= 1");

  std::vector<int> depth = cfg.group_depth.empty() ? default_depth(g.backbone)
                                                   : cfg.group_depth;
  if (static_cast<int>(depth.size()) == 4 && m == 5) depth.push_back(depth.back());
  if (static_cast<int>(depth.size()) != m)
    throw config_error("group_depth needs one entry per backbone group");
  for (int d : depth)
    if (d < 1) throw config_error("group depths must be >= 1");

  if (g.backbone == Backbone::vgg_groups) {
    for (int gi = 0; gi < m; ++gi) {
      GroupDesc gd;
      gd.pool_before = gi > 0;
      int in_c = gi == 0 ? g.in_channels : g.channel_widths[gi - 1];
      for (int ci = 0; ci < depth[gi]; ++ci) {
        ConvShape cs;
        cs.name = "conv" + std::to_string(gi + 1) + "_" + std::to_string(ci + 1);
        cs.in_c = ci == 0 ? in_c : g.channel_widths[gi];
        cs.out_c = g.channel_widths[gi];
        cs.k = 3;
        cs.stride = 1;
        cs.pad = 1;
        cs.relu = true;
        BlockDesc bd;
        bd.convs.push_back(cs);
        gd.blocks.push_back(std::move(bd));
      }
      g.groups.push_back(std::move(gd));
    }
  } else {
    // Stem: one 7x7 stride-2 conv; deeper groups: pool + bottleneck blocks.
    {
      GroupDesc gd;
      ConvShape cs{"conv1", g.in_channels, g.channel_widths[0], 7, 2, 3, true};
      BlockDesc bd;
      bd.convs.push_back(cs);
      gd.blocks.push_back(std::move(bd));
      g.groups.push_back(std::move(gd));
    }
    for (int gi = 1; gi < m; ++gi) {
      GroupDesc gd;
      gd.pool_before = true;
      const int out_c = g.channel_widths[gi];
      const int mid_c = std::max(1, out_c / 4);
      for (int bi = 0; bi < depth[gi]; ++bi) {
        const int in_c = bi == 0 ? g.channel_widths[gi - 1] : out_c;
        const std::string base = "res" + std::to_string(gi + 1) + "_" +
                                 std::to_string(bi + 1);
        BlockDesc bd;
        bd.residual = true;
        bd.convs.push_back(ConvShape{base + "_1", in_c, mid_c, 1, 1, 0, true});
        bd.convs.push_back(ConvShape{base + "_2", mid_c, mid_c, 3, 1, 1, true});
        bd.convs.push_back(ConvShape{base + "_3", mid_c, out_c, 1, 1, 0, false});
        if (in_c != out_c)
          bd.projection = ConvShape{base + "_proj", in_c, out_c, 1, 1, 0, false};
        gd.blocks.push_back(std::move(bd));
      }
      g.groups.push_back(std::move(gd));
    }
  }
  return g;
}

namespace {

// Channel count of feat_conv{m}_fuse: the tap output plus one 1-channel
// message where a connection lands (top-bottom into side 1, bottom-top into
// sides 2..M).
int fuse_channels(const ModelGraph& g, int m) {
  if (m == 0) return g.tap_channels + (g.top_bottom ? 1 : 0);
  return g.tap_channels + (g.bottom_top ? 1 : 0);
}

void add_conv_params(Params& p, Rng& rng, const ConvShape& cs, double sigma) {
  Tensor w(cs.out_c, cs.in_c, cs.k * cs.k);
  for (double& v : w.v) v = rng.normal() * sigma;
  Tensor b(cs.out_c, 1, 1);
  p.entries.emplace_back(cs.name + ".w", ad::make_leaf(std::move(w), true));
  p.entries.emplace_back(cs.name + ".b", ad::make_leaf(std::move(b), true));
}

void add_he_conv(Params& p, Rng& rng, const ConvShape& cs) {
  add_conv_params(p, rng, cs, std::sqrt(2.0 / (cs.in_c * cs.k * cs.k)));
}

struct RawCheckpoint {
  std::uint64_t graph_hash = 0;
  std::uint64_t seed = 0;
  std::vector<double> alpha;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void put_u32(std::string& b, std::uint32_t v) {
  char tmp[4];
  std::memcpy(tmp, &v, 4);
  b.append(tmp, 4);
}
void put_u64(std::string& b, std::uint64_t v) {
  char tmp[8];
  std::memcpy(tmp, &v, 8);
  b.append(tmp, 8);
}
void put_f64(std::string& b, double v) {
  char tmp[8];
  std::memcpy(tmp, &v, 8);
  b.append(tmp, 8);
}

struct Reader {
  const std::string& buf;
  std::size_t at = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (at + n > buf.size()) throw load_error("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    at += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf.data() + at, 8);
    at += 8;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, buf.data() + at, 8);
    at += 8;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf.substr(at, n);
    at += n;
    return s;
  }
};

RawCheckpoint read_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw load_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string all = ss.str();
  if (all.size() < sizeof(kCkptMagic) + 8) throw load_error("truncated checkpoint");
  const std::string payload = all.substr(0, all.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, all.data() + all.size() - 8, 8);
  if (fnv1a64(payload.data(), payload.size()) != stored)
    throw load_error("checkpoint checksum mismatch (corrupted file): " + path);

  Reader r(payload);
  if (r.str(sizeof(kCkptMagic)) != std::string(kCkptMagic, sizeof(kCkptMagic)))
    throw load_error("not a checkpoint file: " + path);
  if (r.u32() != kCkptVersion) throw load_error("unsupported checkpoint version");
  RawCheckpoint ck;
  ck.graph_hash = r.u64();
  ck.seed = r.u64();
  const std::uint32_t na = r.u32();
  for (std::uint32_t i = 0; i < na; ++i) ck.alpha.push_back(r.f64());
  const std::uint32_t ne = r.u32();
  for (std::uint32_t i = 0; i < ne; ++i) {
    const std::uint32_t len = r.u32();
    std::string name = r.str(len);
    const int c = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32());
    const int w = static_cast<int>(r.u32());
    if (c < 1 || h < 1 || w < 1) throw load_error("bad tensor shape in checkpoint");
    Tensor t(c, h, w);
    for (double& v : t.v) v = r.f64();
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

}  // namespace

Params init_params(const ModelGraph& graph, std::uint64_t seed,
                   const std::string& pretrained_path) {
  // He (fan-in) init for the backbone, Xavier for the taps (keeps tap
  // features at backbone magnitude so classifier gradients are not
  // suppressed), small zero-mean for message/classifier convs so initial
  // logits start near zero. Draw order equals entry order, so a fixed seed
  // fixes every tensor.
  constexpr double kSmallSigma = 0.01;
  Params p;
  p.seed = seed;
  p.graph_hash = graph.structure_hash();
  Rng rng(seed);

  for (const auto& gd : graph.groups)
    for (const auto& bd : gd.blocks) {
      for (const auto& cs : bd.convs) add_he_conv(p, rng, cs);
      if (bd.projection) add_he_conv(p, rng, *bd.projection);
    }
  for (int m = 0; m < graph.num_sides; ++m) {
    ConvShape tap{"tap" + std::to_string(m + 1), graph.channel_widths[m],
                  graph.tap_channels, 1, 1, 0, false};
    add_conv_params(p, rng, tap, std::sqrt(1.0 / graph.channel_widths[m]));
  }
  if (graph.top_bottom) {
    ConvShape msg{"top_msg", graph.channel_widths[graph.num_sides - 1], 1, 3, 1, 1,
                  false};
    add_conv_params(p, rng, msg, kSmallSigma);
  }
  if (graph.bottom_top)
    for (int m = 0; m + 1 < graph.num_sides; ++m) {
      ConvShape msg{"btm_msg" + std::to_string(m + 1), fuse_channels(graph, m), 1, 1,
                    1, 0, false};
      add_conv_params(p, rng, msg, kSmallSigma);
    }
  for (int m = 0; m < graph.num_sides; ++m) {
    ConvShape side{"side" + std::to_string(m + 1), fuse_channels(graph, m), 1, 1, 1, 0,
                   false};
    add_conv_params(p, rng, side, kSmallSigma);
  }
  Tensor h(graph.num_sides, 1, 1, 1.0 / graph.num_sides);
  p.entries.emplace_back("fuse.h", ad::make_leaf(std::move(h), true));
  p.alpha.assign(graph.num_sides, 1.0);

  if (!pretrained_path.empty()) {
    const RawCheckpoint ck = read_checkpoint_file(pretrained_path);
    std::size_t copied = 0;
    for (const auto& [name, t] : ck.tensors) {
      ad::VarPtr mine = p.find(name);
      if (!mine) continue;
      if (!mine->value.same_shape(t))
        throw config_error("pretrained tensor " + name + " has shape (" +
                           std::to_string(t.c) + "," + std::to_string(t.h) + "," +
                           std::to_string(t.w) + ") but the graph declares (" +
                           std::to_string(mine->value.c) + "," +
                           std::to_string(mine->value.h) + "," +
                           std::to_string(mine->value.w) + ")");
      mine->value = t;
      ++copied;
    }
    if (copied == 0)
      throw config_error("pretrained checkpoint shares no layer names with this graph");
  }
  return p;
}

namespace {

ad::VarPtr need_param(const Params& p, const std::string& name) {
  ad::VarPtr v = p.find(name);
  if (!v) throw structural_error("missing parameter entry: " + name);
  return v;
}

ad::VarPtr run_conv(ad::Tape& tape, const Params& p, const ConvShape& cs,
                    const ad::VarPtr& x) {
  ad::VarPtr out = tape.conv2d(x, need_param(p, cs.name + ".w"),
                               need_param(p, cs.name + ".b"), cs.stride, cs.pad);
  return cs.relu ? tape.relu(out) : out;
}

}  // namespace

TapedOutputs forward_taped(ad::Tape& tape, const ModelGraph& graph, const Params& params,
                           const ad::VarPtr& image) {
  const int m = graph.num_sides;
  if (image->value.c != graph.in_channels)
    throw structural_error("input has " + std::to_string(image->value.c) +
                           " channels, graph expects " +
                           std::to_string(graph.in_channels));
  const int h = image->value.h, w = image->value.w;
  const int max_stride = graph.group_strides.back();
  if (h < max_stride || w < max_stride)
    throw structural_error("input " + std::to_string(h) + "x" + std::to_string(w) +
                           " is smaller than the deepest stride " +
                           std::to_string(max_stride));

  ad::VarPtr cur = image;
  if (graph.input_center != 0.0) cur = tape.shift(cur, -graph.input_center);
  if (graph.input_scale != 1.0) cur = tape.scale(cur, graph.input_scale);
  std::vector<ad::VarPtr> group_out(m);
  for (int gi = 0; gi < m; ++gi) {
    if (graph.groups[gi].pool_before) cur = tape.maxpool2(cur);
    for (const auto& bd : graph.groups[gi].blocks) {
      if (!bd.residual) {
        for (const auto& cs : bd.convs) cur = run_conv(tape, params, cs, cur);
      } else {
        ad::VarPtr in = cur, t = cur;
        for (const auto& cs : bd.convs) t = run_conv(tape, params, cs, t);
        ad::VarPtr skip = bd.projection ? run_conv(tape, params, *bd.projection, in) : in;
        cur = tape.relu(tape.add(t, skip));
      }
    }
    group_out[gi] = cur;
  }

  // Taps: linear 1x1 conv to tap_channels, then fixed bilinear upsample back
  // to the input grid.
  std::vector<ad::VarPtr> feat(m);
  for (int gi = 0; gi < m; ++gi) {
    ConvShape tap{"tap" + std::to_string(gi + 1), graph.channel_widths[gi],
                  graph.tap_channels, 1, 1, 0, false};
    ad::VarPtr f = run_conv(tape, params, tap, group_out[gi]);
    const int stride = graph.group_strides[gi];
    feat[gi] = stride == 1 ? f : tape.upsample_bilinear(f, stride, h, w);
  }

  std::vector<ad::VarPtr> fuse(m);
  if (graph.top_bottom) {
    ConvShape msg{"top_msg", graph.channel_widths[m - 1], 1, 3, 1, 1, false};
    ad::VarPtr t = run_conv(tape, params, msg, group_out[m - 1]);
    ad::VarPtr up = tape.upsample_bilinear(t, graph.group_strides[m - 1], h, w);
    fuse[0] = tape.concat({feat[0], up});
  } else {
    fuse[0] = feat[0];
  }
  for (int gi = 1; gi < m; ++gi) {
    if (graph.bottom_top) {
      ConvShape msg{"btm_msg" + std::to_string(gi), fuse_channels(graph, gi - 1), 1, 1,
                    1, 0, false};
      ad::VarPtr t = run_conv(tape, params, msg, fuse[gi - 1]);
      fuse[gi] = tape.concat({feat[gi], t});
    } else {
      fuse[gi] = feat[gi];
    }
  }

  TapedOutputs out;
  out.side_logits.resize(m);
  for (int gi = 0; gi < m; ++gi) {
    ConvShape side{"side" + std::to_string(gi + 1), fuse_channels(graph, gi), 1, 1, 1,
                   0, false};
    out.side_logits[gi] = run_conv(tape, params, side, fuse[gi]);
  }
  std::vector<ad::VarPtr> fusion_in = out.side_logits;
  if (graph.fuse_on == FuseOn::probs)
    for (auto& v : fusion_in) v = tape.sigmoid(v);
  out.fuse_logit = tape.weighted_sum(fusion_in, need_param(params, "fuse.h"));
  return out;
}

SideOutputs forward(const ModelGraph& graph, const Params& params, const Tensor& image) {
  ad::Tape tape(false);
  TapedOutputs t = forward_taped(tape, graph, params, ad::make_leaf(image));
  SideOutputs so;
  so.side_logits.reserve(t.side_logits.size());
  so.side_probs.reserve(t.side_logits.size());
  for (const auto& v : t.side_logits) {
    so.side_logits.push_back(v->value);
    Tensor p = v->value;
    for (double& x : p.v) x = ad::sigmoid_scalar(x);
    so.side_probs.push_back(std::move(p));
  }
  so.fuse_logit = t.fuse_logit->value;
  so.fuse_prob = t.fuse_logit->value;
  for (double& x : so.fuse_prob.v) x = ad::sigmoid_scalar(x);
  return so;
}

void checkpoint_save(const Params& params, const std::string& path) {
  std::string b;
  b.append(kCkptMagic, sizeof(kCkptMagic));
  put_u32(b, kCkptVersion);
  put_u64(b, params.graph_hash);
  put_u64(b, params.seed);
  put_u32(b, static_cast<std::uint32_t>(params.alpha.size()));
  for (double a : params.alpha) put_f64(b, a);
  put_u32(b, static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& [name, var] : params.entries) {
    put_u32(b, static_cast<std::uint32_t>(name.size()));
    b += name;
    put_u32(b, static_cast<std::uint32_t>(var->value.c));
    put_u32(b, static_cast<std::uint32_t>(var->value.h));
    put_u32(b, static_cast<std::uint32_t>(var->value.w));
    for (double v : var->value.v) put_f64(b, v);
  }
  put_u64(b, fnv1a64(b.data(), b.size()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot write checkpoint: " + path);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!f) throw io_error("short write on checkpoint: " + path);
}

Params checkpoint_load(const std::string& path, const ModelGraph& graph) {
  RawCheckpoint ck = read_checkpoint_file(path);
  if (ck.graph_hash != graph.structure_hash())
    throw config_error("checkpoint " + path +
                       " was written for a different graph (structure hash mismatch)");
  Params p;
  p.graph_hash = ck.graph_hash;
  p.seed = ck.seed;
  p.alpha = ck.alpha;
  for (auto& [name, t] : ck.tensors)
    p.entries.emplace_back(name, ad::make_leaf(std::move(t), true));
  return p;
}

std::string describe(const ModelGraph& graph) {
  std::ostringstream o;
  o << "structure: " << graph.structure_string() << "\n";
  o << "layer                type        in->out   k  stride  pad  params\n";
  std::size_t total = 0;
  auto conv_line = [&](const ConvShape& cs, const char* type) {
    const std::size_t n =
        static_cast<std::size_t>(cs.out_c) * cs.in_c * cs.k * cs.k + cs.out_c;
    total += n;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s %-10s %4d->%-4d %2d  %5d  %3d  %zu\n",
                  cs.name.c_str(), type, cs.in_c, cs.out_c, cs.k, cs.stride, cs.pad, n);
    o << buf;
  };
  for (std::size_t gi = 0; gi < graph.groups.size(); ++gi) {
    const auto& gd = graph.groups[gi];
    if (gd.pool_before)
      o << "pool" << gi + 1 << "                maxpool2\n";
    for (const auto& bd : gd.blocks) {
      for (const auto& cs : bd.convs) conv_line(cs, bd.residual ? "resconv" : "conv");
      if (bd.projection) conv_line(*bd.projection, "proj");
    }
  }
  for (int m = 0; m < graph.num_sides; ++m) {
    conv_line(ConvShape{"tap" + std::to_string(m + 1), graph.channel_widths[m],
                        graph.tap_channels, 1, 1, 0, false},
              "tap");
    if (graph.group_strides[m] > 1)
      o << "up" << m + 1 << "                  bilinear x" << graph.group_strides[m]
        << " (fixed)\n";
  }
  if (graph.top_bottom)
    conv_line(ConvShape{"top_msg", graph.channel_widths[graph.num_sides - 1], 1, 3, 1,
                        1, false},
              "message");
  if (graph.bottom_top)
    for (int m = 0; m + 1 < graph.num_sides; ++m)
      conv_line(ConvShape{"btm_msg" + std::to_string(m + 1), fuse_channels(graph, m),
                          1, 1, 1, 0, false},
                "message");
  for (int m = 0; m < graph.num_sides; ++m)
    conv_line(ConvShape{"side" + std::to_string(m + 1), fuse_channels(graph, m), 1, 1,
                        1, 0, false},
              "classifier");
  total += graph.num_sides;
  o << "fuse.h               weights      " << graph.num_sides << " fusion weights\n";
  o << "total parameters: " << total << "\n";
  return o.str();
}

}  // namespace vseg
