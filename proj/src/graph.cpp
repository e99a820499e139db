// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "poseopt/common.hpp"

namespace poseopt {

using ordered_json = nlohmann::ordered_json;

int64_t TensorShape::numel() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

std::string TensorShape::str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ")";
  return os.str();
}

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Conv2d: return "Conv2d";
    case OpKind::Activation: return "Activation";
    case OpKind::Add: return "Add";
    case OpKind::Concat: return "Concat";
    case OpKind::Upsample: return "Upsample";
    case OpKind::MaxPool: return "MaxPool";
  }
  return "?";
}

const char* to_string(ActFn f) {
  switch (f) {
    case ActFn::Relu: return "relu";
    case ActFn::Prelu: return "prelu";
    case ActFn::Swish: return "swish";
    case ActFn::Hardtanh: return "hardtanh";
    case ActFn::Sigmoid: return "sigmoid";
  }
  return "?";
}

const char* to_string(UpsampleMode m) {
  return m == UpsampleMode::Nearest ? "nearest" : "bilinear";
}

const char* to_string(BlockTag t) {
  switch (t) {
    case BlockTag::Backbone: return "Backbone";
    case BlockTag::InitialStage: return "InitialStage";
    case BlockTag::HeatmapBranch: return "HeatmapBranch";
    case BlockTag::PafBranch: return "PafBranch";
    case BlockTag::Other: return "Other";
  }
  return "?";
}

namespace {

[[noreturn]] void schema_fail(const std::string& msg) {
  throw data_error("SchemaError", msg);
}

template <typename T, size_t N>
T enum_from_string(const std::string& s, const std::array<std::pair<const char*, T>, N>& table,
                   const char* what) {
  for (const auto& [name, val] : table)
    if (s == name) return val;
  schema_fail(std::string("bad ") + what + " value: '" + s + "'");
}

}  // namespace

OpKind op_kind_from_string(const std::string& s) {
  static const std::array<std::pair<const char*, OpKind>, 6> table{{
      {"Conv2d", OpKind::Conv2d}, {"Activation", OpKind::Activation}, {"Add", OpKind::Add},
      {"Concat", OpKind::Concat}, {"Upsample", OpKind::Upsample}, {"MaxPool", OpKind::MaxPool}}};
  return enum_from_string(s, table, "op");
}

ActFn act_fn_from_string(const std::string& s) {
  static const std::array<std::pair<const char*, ActFn>, 5> table{{
      {"relu", ActFn::Relu}, {"prelu", ActFn::Prelu}, {"swish", ActFn::Swish},
      {"hardtanh", ActFn::Hardtanh}, {"sigmoid", ActFn::Sigmoid}}};
  return enum_from_string(s, table, "activation fn");
}

UpsampleMode upsample_mode_from_string(const std::string& s) {
  static const std::array<std::pair<const char*, UpsampleMode>, 2> table{{
      {"nearest", UpsampleMode::Nearest}, {"bilinear", UpsampleMode::Bilinear}}};
  return enum_from_string(s, table, "upsample mode");
}

BlockTag block_tag_from_string(const std::string& s) {
  static const std::array<std::pair<const char*, BlockTag>, 5> table{{
      {"Backbone", BlockTag::Backbone}, {"InitialStage", BlockTag::InitialStage},
      {"HeatmapBranch", BlockTag::HeatmapBranch}, {"PafBranch", BlockTag::PafBranch},
      {"Other", BlockTag::Other}}};
  return enum_from_string(s, table, "block_tag");
}

const OpNode* Graph::find_node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const GraphInput* Graph::find_input(const std::string& name) const {
  for (const auto& in : inputs)
    if (in.name == name) return &in;
  return nullptr;
}

// ---------------------------------------------------------------------------
// JSON parse / serialize

namespace {

void require_keys(const ordered_json& obj, std::initializer_list<const char*> keys,
                  const std::string& ctx) {
  for (const char* k : keys)
    if (!obj.contains(k)) schema_fail("missing field '" + std::string(k) + "' in " + ctx);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) { known = true; break; }
    if (!known) schema_fail("unknown field '" + it.key() + "' in " + ctx);
  }
}

int get_int(const ordered_json& obj, const char* key, const std::string& ctx) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) schema_fail("field '" + std::string(key) + "' in " + ctx + " must be an integer");
  return v.get<int>();
}

std::string get_str(const ordered_json& obj, const char* key, const std::string& ctx) {
  const auto& v = obj.at(key);
  if (!v.is_string()) schema_fail("field '" + std::string(key) + "' in " + ctx + " must be a string");
  return v.get<std::string>();
}

OpNode parse_node(const ordered_json& jn) {
  if (!jn.is_object()) schema_fail("node entry must be an object");
  require_keys(jn, {"id", "op", "attrs", "inputs", "block_tag"}, "node");
  OpNode n;
  n.id = get_str(jn, "id", "node");
  const std::string ctx = "node '" + n.id + "'";
  n.kind = op_kind_from_string(get_str(jn, "op", ctx));
  n.block_tag = block_tag_from_string(get_str(jn, "block_tag", ctx));
  const auto& ji = jn.at("inputs");
  if (!ji.is_array()) schema_fail("'inputs' must be an array in " + ctx);
  for (const auto& e : ji) {
    if (!e.is_string()) schema_fail("input references must be strings in " + ctx);
    n.inputs.push_back(e.get<std::string>());
  }
  const auto& ja = jn.at("attrs");
  if (!ja.is_object()) schema_fail("'attrs' must be an object in " + ctx);
  switch (n.kind) {
    case OpKind::Conv2d: {
      require_keys(ja, {"kernel_h", "kernel_w", "stride", "padding", "dilation",
                        "in_channels", "out_channels", "groups", "has_bias"}, ctx + " attrs");
      ConvAttrs a;
      a.kernel_h = get_int(ja, "kernel_h", ctx);
      a.kernel_w = get_int(ja, "kernel_w", ctx);
      a.stride = get_int(ja, "stride", ctx);
      a.padding = get_int(ja, "padding", ctx);
      a.dilation = get_int(ja, "dilation", ctx);
      a.in_channels = get_int(ja, "in_channels", ctx);
      a.out_channels = get_int(ja, "out_channels", ctx);
      a.groups = get_int(ja, "groups", ctx);
      if (!ja.at("has_bias").is_boolean()) schema_fail("'has_bias' must be a bool in " + ctx);
      a.has_bias = ja.at("has_bias").get<bool>();
      n.attrs = a;
      break;
    }
    case OpKind::Activation: {
      require_keys(ja, {"fn"}, ctx + " attrs");
      n.attrs = ActAttrs{act_fn_from_string(get_str(ja, "fn", ctx))};
      break;
    }
    case OpKind::Upsample: {
      require_keys(ja, {"scale", "mode"}, ctx + " attrs");
      n.attrs = UpsampleAttrs{get_int(ja, "scale", ctx),
                              upsample_mode_from_string(get_str(ja, "mode", ctx))};
      break;
    }
    case OpKind::MaxPool: {
      require_keys(ja, {"kernel", "stride", "padding"}, ctx + " attrs");
      n.attrs = PoolAttrs{get_int(ja, "kernel", ctx), get_int(ja, "stride", ctx),
                          get_int(ja, "padding", ctx)};
      break;
    }
    case OpKind::Add:
    case OpKind::Concat:
      require_keys(ja, {}, ctx + " attrs");
      n.attrs = NoAttrs{};
      break;
  }
  return n;
}

}  // namespace

Graph parse_graph(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    schema_fail(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) schema_fail("top-level document must be an object");
  require_keys(j, {"name", "inputs", "nodes", "outputs"}, "graph");
  Graph g;
  g.name = get_str(j, "name", "graph");
  if (!j.at("inputs").is_array()) schema_fail("'inputs' must be an array");
  for (const auto& ji : j.at("inputs")) {
    require_keys(ji, {"name", "shape"}, "graph input");
    GraphInput in;
    in.name = get_str(ji, "name", "graph input");
    if (!ji.at("shape").is_array()) schema_fail("input shape must be an array");
    for (const auto& d : ji.at("shape")) {
      if (!d.is_number_integer() || d.get<int64_t>() < 1)
        schema_fail("input shape extents must be integers >= 1");
      in.shape.dims.push_back(d.get<int64_t>());
    }
    g.inputs.push_back(std::move(in));
  }
  if (!j.at("nodes").is_array()) schema_fail("'nodes' must be an array");
  std::unordered_set<std::string> ids;
  for (const auto& jn : j.at("nodes")) {
    OpNode n = parse_node(jn);
    if (!ids.insert(n.id).second)
      throw data_error("DuplicateId", "duplicate node id '" + n.id + "'");
    g.nodes.push_back(std::move(n));
  }
  if (!j.at("outputs").is_array()) schema_fail("'outputs' must be an array");
  for (const auto& o : j.at("outputs")) {
    if (!o.is_string()) schema_fail("output references must be strings");
    g.outputs.push_back(o.get<std::string>());
  }
  // Edge resolution is a hard parse error; deeper invariants go through validate().
  std::unordered_set<std::string> known;
  for (const auto& in : g.inputs) known.insert(in.name);
  for (const auto& n : g.nodes) known.insert(n.id);
  for (const auto& n : g.nodes)
    for (const auto& ref : n.inputs)
      if (!known.count(ref))
        throw data_error("DanglingEdge",
                         "node '" + n.id + "' references unknown input '" + ref + "'");
  for (const auto& o : g.outputs)
    if (!known.count(o))
      throw data_error("DanglingEdge", "unknown output id '" + o + "'");
  return g;
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileError", "cannot open graph file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str());
}

std::string serialize_graph(const Graph& g) {
  ordered_json j;
  j["name"] = g.name;
  j["inputs"] = ordered_json::array();
  for (const auto& in : g.inputs)
    j["inputs"].push_back({{"name", in.name}, {"shape", in.shape.dims}});
  j["nodes"] = ordered_json::array();
  for (const auto& n : g.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["op"] = to_string(n.kind);
    ordered_json ja = ordered_json::object();
    switch (n.kind) {
      case OpKind::Conv2d: {
        const auto& a = n.conv();
        ja = {{"kernel_h", a.kernel_h}, {"kernel_w", a.kernel_w}, {"stride", a.stride},
              {"padding", a.padding},   {"dilation", a.dilation},
              {"in_channels", a.in_channels}, {"out_channels", a.out_channels},
              {"groups", a.groups},     {"has_bias", a.has_bias}};
        break;
      }
      case OpKind::Activation:
        ja = {{"fn", to_string(n.act().fn)}};
        break;
      case OpKind::Upsample:
        ja = {{"scale", n.upsample().scale}, {"mode", to_string(n.upsample().mode)}};
        break;
      case OpKind::MaxPool:
        ja = {{"kernel", n.pool().kernel}, {"stride", n.pool().stride},
              {"padding", n.pool().padding}};
        break;
      case OpKind::Add:
      case OpKind::Concat:
        break;
    }
    jn["attrs"] = ja;
    jn["inputs"] = n.inputs;
    jn["block_tag"] = to_string(n.block_tag);
    j["nodes"].push_back(std::move(jn));
  }
  j["outputs"] = g.outputs;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation / topo / shape inference

namespace {

// Shape walk shared by validate() (collect everything) and infer_shapes()
// (throw on first problem). Returns shapes for nodes it could resolve.
std::map<std::string, TensorShape> shape_walk(const Graph& g, const std::vector<size_t>& order,
                                              std::vector<Violation>* sink) {
  std::map<std::string, TensorShape> shapes;
  for (const auto& in : g.inputs) shapes[in.name] = in.shape;

  auto report = [&](const std::string& node_id, const std::string& msg) {
    if (sink) {
      sink->push_back({"ShapeMismatch", node_id, msg});
      return;
    }
    throw data_error("ShapeMismatch", "node '" + node_id + "': " + msg);
  };

  for (size_t idx : order) {
    const OpNode& n = g.nodes[idx];
    std::vector<const TensorShape*> in_shapes;
    bool unresolved = false;
    for (const auto& ref : n.inputs) {
      auto it = shapes.find(ref);
      if (it == shapes.end()) { unresolved = true; break; }
      in_shapes.push_back(&it->second);
    }
    if (unresolved || in_shapes.empty()) continue;  // upstream already reported

    switch (n.kind) {
      case OpKind::Conv2d: {
        const auto& a = n.conv();
        const TensorShape& s = *in_shapes[0];
        if (s.dims.size() != 3) { report(n.id, "Conv2d input must be 3-D, got " + s.str()); break; }
        if (s.dims[0] != a.in_channels) {
          report(n.id, "Conv2d expects " + std::to_string(a.in_channels) + " channels, got " + s.str());
          break;
        }
        auto out_extent = [&](int64_t in, int k) {
          return (in + 2 * a.padding - static_cast<int64_t>(a.dilation) * (k - 1) - 1) / a.stride + 1;
        };
        int64_t oh = out_extent(s.dims[1], a.kernel_h);
        int64_t ow = out_extent(s.dims[2], a.kernel_w);
        if (oh < 1 || ow < 1) { report(n.id, "Conv2d output collapses to empty on " + s.str()); break; }
        shapes[n.id] = TensorShape{{a.out_channels, oh, ow}};
        break;
      }
      case OpKind::Activation:
        shapes[n.id] = *in_shapes[0];
        break;
      case OpKind::Add: {
        bool ok = true;
        for (size_t i = 1; i < in_shapes.size(); ++i)
          if (!(*in_shapes[i] == *in_shapes[0])) {
            report(n.id, "Add inputs differ: " + in_shapes[0]->str() + " vs " + in_shapes[i]->str());
            ok = false;
            break;
          }
        if (ok) shapes[n.id] = *in_shapes[0];
        break;
      }
      case OpKind::Concat: {
        const TensorShape& s0 = *in_shapes[0];
        if (s0.dims.size() != 3) { report(n.id, "Concat input must be 3-D"); break; }
        int64_t c = s0.dims[0];
        bool ok = true;
        for (size_t i = 1; i < in_shapes.size(); ++i) {
          const TensorShape& si = *in_shapes[i];
          if (si.dims.size() != 3 || si.dims[1] != s0.dims[1] || si.dims[2] != s0.dims[2]) {
            report(n.id, "Concat spatial sizes differ: " + s0.str() + " vs " + si.str());
            ok = false;
            break;
          }
          c += si.dims[0];
        }
        if (ok) shapes[n.id] = TensorShape{{c, s0.dims[1], s0.dims[2]}};
        break;
      }
      case OpKind::Upsample: {
        const TensorShape& s = *in_shapes[0];
        if (s.dims.size() != 3) { report(n.id, "Upsample input must be 3-D"); break; }
        shapes[n.id] = TensorShape{{s.dims[0], s.dims[1] * n.upsample().scale,
                                    s.dims[2] * n.upsample().scale}};
        break;
      }
      case OpKind::MaxPool: {
        const auto& a = n.pool();
        const TensorShape& s = *in_shapes[0];
        if (s.dims.size() != 3) { report(n.id, "MaxPool input must be 3-D"); break; }
        int64_t oh = (s.dims[1] + 2 * a.padding - a.kernel) / a.stride + 1;
        int64_t ow = (s.dims[2] + 2 * a.padding - a.kernel) / a.stride + 1;
        if (oh < 1 || ow < 1) { report(n.id, "MaxPool output collapses to empty"); break; }
        shapes[n.id] = TensorShape{{s.dims[0], oh, ow}};
        break;
      }
    }
  }
  return shapes;
}

// Kahn topo sort over resolvable nodes; leftover nodes are cyclic (or behind
// dangling edges, reported separately).
std::vector<size_t> topo_kahn(const Graph& g, std::vector<size_t>* leftover) {
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].id, i);
  std::unordered_set<std::string> input_names;
  for (const auto& in : g.inputs) input_names.insert(in.name);

  std::vector<int> indeg(g.nodes.size(), 0);
  std::vector<std::vector<size_t>> consumers(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    for (const auto& ref : g.nodes[i].inputs) {
      auto it = index.find(ref);
      if (it != index.end()) {
        ++indeg[i];
        consumers[it->second].push_back(i);
      }
      // refs to graph inputs (or dangling) add no dependency
    }
  }
  std::deque<size_t> ready;
  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (indeg[i] == 0) ready.push_back(i);
  std::vector<size_t> order;
  while (!ready.empty()) {
    size_t i = ready.front();
    ready.pop_front();
    order.push_back(i);
    for (size_t c : consumers[i])
      if (--indeg[c] == 0) ready.push_back(c);
  }
  if (leftover) {
    for (size_t i = 0; i < g.nodes.size(); ++i)
      if (indeg[i] > 0) leftover->push_back(i);
  }
  return order;
}

void check_attrs(const Graph& g, std::vector<Violation>& out) {
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::Conv2d) {
      const auto& a = n.conv();
      if (a.kernel_h < 1 || a.kernel_w < 1 || a.stride < 1 || a.padding < 0 ||
          a.in_channels < 1 || a.out_channels < 1 || a.groups < 1)
        out.push_back({"InvalidAttr", n.id, "non-positive Conv2d attribute"});
      else {
        if (a.dilation < 1)
          out.push_back({"InvalidAttr", n.id, "dilation must be >= 1"});
        if (a.in_channels % a.groups != 0 || a.out_channels % a.groups != 0)
          out.push_back({"InvalidAttr", n.id, "channels not divisible by groups"});
        if (a.kernel_h % 2 == 0 || a.kernel_w % 2 == 0)
          out.push_back({"InvalidAttr", n.id, "even kernels unsupported (rewrite rules need odd)"});
      }
      if (n.inputs.size() != 1) out.push_back({"InvalidArity", n.id, "Conv2d takes one input"});
    } else if (n.kind == OpKind::Add || n.kind == OpKind::Concat) {
      if (n.inputs.size() < 2)
        out.push_back({"InvalidArity", n.id, std::string(to_string(n.kind)) + " takes >= 2 inputs"});
    } else {
      if (n.inputs.size() != 1)
        out.push_back({"InvalidArity", n.id, std::string(to_string(n.kind)) + " takes one input"});
      if (n.kind == OpKind::Upsample && n.upsample().scale < 1)
        out.push_back({"InvalidAttr", n.id, "upsample scale must be >= 1"});
      if (n.kind == OpKind::MaxPool &&
          (n.pool().kernel < 1 || n.pool().stride < 1 || n.pool().padding < 0))
        out.push_back({"InvalidAttr", n.id, "non-positive MaxPool attribute"});
    }
  }
}

}  // namespace

std::vector<Violation> validate(const Graph& g) {
  std::vector<Violation> out;

  std::unordered_set<std::string> ids;
  for (const auto& n : g.nodes)
    if (!ids.insert(n.id).second) out.push_back({"DuplicateId", n.id, "duplicate node id"});
  std::unordered_set<std::string> known = ids;
  for (const auto& in : g.inputs) known.insert(in.name);
  for (const auto& n : g.nodes)
    for (const auto& ref : n.inputs)
      if (!known.count(ref))
        out.push_back({"DanglingEdge", n.id, "unknown input '" + ref + "'"});
  for (const auto& o : g.outputs)
    if (!known.count(o)) out.push_back({"DanglingEdge", o, "unknown output id"});

  check_attrs(g, out);

  std::vector<size_t> leftover;
  std::vector<size_t> order = topo_kahn(g, &leftover);
  for (size_t i : leftover) out.push_back({"CycleDetected", g.nodes[i].id, "node lies on a cycle"});

  if (out.empty()) shape_walk(g, order, &out);
  return out;
}

std::vector<size_t> topo_order(const Graph& g) {
  std::vector<size_t> leftover;
  std::vector<size_t> order = topo_kahn(g, &leftover);
  if (!leftover.empty())
    throw data_error("CycleDetected", "graph has a cycle at node '" + g.nodes[leftover[0]].id + "'");
  return order;
}

std::map<std::string, TensorShape> infer_shapes(const Graph& g) {
  return shape_walk(g, topo_order(g), nullptr);
}

int conv_layer_count(const Graph& g) {
  int n = 0;
  for (const auto& node : g.nodes)
    if (node.kind == OpKind::Conv2d) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// Stage specs

StageSpec parse_stage_spec(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    schema_fail(std::string("malformed stage spec JSON: ") + e.what());
  }
  StageSpec spec;
  for (const auto& js : j.at("stages")) {
    Stage st;
    st.num_blocks = js.at("num_blocks").get<int>();
    st.width = js.at("width").get<int>();
    std::string kind = js.at("block_kind").get<std::string>();
    if (kind == "plain3x3") st.block_kind = BlockKind::Plain3x3;
    else if (kind == "bottleneck") st.block_kind = BlockKind::Bottleneck;
    else schema_fail("bad block_kind '" + kind + "'");
    st.stride_first = js.value("stride_first", 1);
    spec.stages.push_back(st);
  }
  return spec;
}

StageSpec load_stage_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileError", "cannot open stage spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_stage_spec(ss.str());
}

std::string serialize_stage_spec(const StageSpec& spec) {
  ordered_json j;
  j["stages"] = ordered_json::array();
  for (const auto& st : spec.stages)
    j["stages"].push_back({{"num_blocks", st.num_blocks},
                           {"width", st.width},
                           {"block_kind", st.block_kind == BlockKind::Plain3x3 ? "plain3x3" : "bottleneck"},
                           {"stride_first", st.stride_first}});
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Backbone builder

Graph build_backbone(const StageSpec& spec, int in_channels) {
  if (spec.stages.empty())
    throw data_error("InvalidSpec", "stage spec has no stages");
  for (const auto& s : spec.stages) {
    if (s.num_blocks < 1) throw data_error("InvalidSpec", "num_blocks must be >= 1");
    if (s.width < 1) throw data_error("InvalidSpec", "width must be >= 1");
    if (s.stride_first < 1) throw data_error("InvalidSpec", "stride_first must be >= 1");
  }
  if (in_channels < 1) throw data_error("InvalidSpec", "in_channels must be >= 1");

  Graph g;
  g.name = "backbone";
  g.inputs.push_back({"input", TensorShape{{in_channels, 64, 64}}});
  std::string prev = "input";
  int prev_ch = in_channels;

  auto conv = [&](const std::string& id, int in_ch, int out_ch, int k, int stride) {
    OpNode n;
    n.id = id;
    n.kind = OpKind::Conv2d;
    ConvAttrs a;
    a.kernel_h = a.kernel_w = k;
    a.stride = stride;
    a.padding = (k - 1) / 2;
    a.in_channels = in_ch;
    a.out_channels = out_ch;
    n.attrs = a;
    n.inputs = {prev};
    n.block_tag = BlockTag::Backbone;
    g.nodes.push_back(n);
    prev = id;
    prev_ch = out_ch;
  };
  auto act = [&](const std::string& id) {
    OpNode n;
    n.id = id;
    n.kind = OpKind::Activation;
    n.attrs = ActAttrs{ActFn::Relu};
    n.inputs = {prev};
    n.block_tag = BlockTag::Backbone;
    g.nodes.push_back(n);
    prev = id;
  };

  for (size_t si = 0; si < spec.stages.size(); ++si) {
    const Stage& st = spec.stages[si];
    for (int b = 0; b < st.num_blocks; ++b) {
      std::string base = "s" + std::to_string(si) + "_b" + std::to_string(b);
      int stride = (b == 0) ? st.stride_first : 1;
      if (st.block_kind == BlockKind::Plain3x3) {
        conv(base + "_conv", prev_ch, st.width, 3, stride);
        act(base + "_act");
      } else {
        // Bottleneck: 1x1 reduce to width/4, 3x3, 1x1 expand to width, with a
        // residual Add. A 1x1 projection is added only when the skip path
        // cannot be an identity (channel or stride change).
        std::string skip = prev;
        int skip_ch = prev_ch;
        int mid = std::max(1, st.width / 4);
        conv(base + "_conv1", prev_ch, mid, 1, 1);
        act(base + "_act1");
        conv(base + "_conv2", mid, mid, 3, stride);
        act(base + "_act2");
        conv(base + "_conv3", mid, st.width, 1, 1);
        std::string main = prev;
        if (skip_ch != st.width || stride != 1) {
          prev = skip;
          prev_ch = skip_ch;
          conv(base + "_proj", skip_ch, st.width, 1, stride);
          skip = prev;
        }
        OpNode add;
        add.id = base + "_add";
        add.kind = OpKind::Add;
        add.attrs = NoAttrs{};
        add.inputs = {main, skip};
        add.block_tag = BlockTag::Backbone;
        g.nodes.push_back(add);
        prev = add.id;
        prev_ch = st.width;
        act(base + "_act3");
      }
    }
  }
  g.outputs = {prev};
  return g;
}

}  // namespace poseopt
