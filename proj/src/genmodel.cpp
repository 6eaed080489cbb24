#include "splitstream/genmodel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace splitstream {

static_assert(std::endian::native == std::endian::little, "weights blob reader assumes a little-endian host");

using nlohmann::json;

std::string to_string(LayerType type) {
  switch (type) {
    case LayerType::Dense: return "dense";
    case LayerType::Conv1d: return "conv1d";
    case LayerType::PRelu: return "prelu";
    case LayerType::DepthToSpace: return "depth_to_space";
    case LayerType::AddSkipMarker: return "add_skip_marker";
    case LayerType::Affine: return "affine";
  }
  return "?";
}

namespace {

std::size_t product(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

LayerType parse_layer_type(const std::string& s, int index) {
  if (s == "dense") return LayerType::Dense;
  if (s == "conv1d") return LayerType::Conv1d;
  if (s == "prelu") return LayerType::PRelu;
  if (s == "depth_to_space") return LayerType::DepthToSpace;
  if (s == "add_skip_marker") return LayerType::AddSkipMarker;
  if (s == "affine") return LayerType::Affine;
  throw LoadError(index, "unsupported layer type '" + s + "'");
}

/// (channels, length) view of a declared shape.
std::pair<int, int> as_channels_length(const std::vector<int>& shape) {
  if (shape.size() == 1) return {1, shape[0]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  return {-1, -1};
}

void expect_param(const LayerSpec& layer, int index, const std::string& name, const std::vector<int>& shape) {
  const ParamRef* p = layer.param(name);
  if (!p) throw LoadError(index, "missing parameter '" + name + "'");
  if (p->shape != shape) {
    std::ostringstream os;
    os << "parameter '" << name << "' has shape [";
    for (std::size_t i = 0; i < p->shape.size(); ++i) os << (i ? "," : "") << p->shape[i];
    os << "], expected [";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    throw LoadError(index, os.str());
  }
}

void validate_layer(const LayerSpec& layer, int index) {
  const auto in_size = product(layer.input_shape);
  const auto out_size = product(layer.output_shape);
  if (layer.input_shape.empty() || layer.output_shape.empty() || in_size == 0 || out_size == 0)
    throw LoadError(index, "input and output shapes must be non-empty");
  const auto [c_in, l_in] = as_channels_length(layer.input_shape);
  const auto [c_out, l_out] = as_channels_length(layer.output_shape);
  std::size_t expected_params = 0;
  switch (layer.type) {
    case LayerType::Dense:
      expect_param(layer, index, "weight", {static_cast<int>(out_size), static_cast<int>(in_size)});
      expect_param(layer, index, "bias", {static_cast<int>(out_size)});
      expected_params = 2;
      break;
    case LayerType::Conv1d: {
      if (c_in < 0 || c_out < 0) throw LoadError(index, "conv1d shapes must be (channels, length)");
      if (l_in != l_out) throw LoadError(index, "conv1d must preserve the length");
      const ParamRef* w = layer.param("weight");
      if (!w || w->shape.size() != 3) throw LoadError(index, "conv1d needs a rank-3 'weight'");
      if (w->shape[2] % 2 == 0) throw LoadError(index, "conv1d kernel width must be odd");
      expect_param(layer, index, "weight", {c_out, c_in, w->shape[2]});
      expect_param(layer, index, "bias", {c_out});
      expected_params = 2;
      break;
    }
    case LayerType::PRelu:
      if (c_in < 0 || layer.input_shape != layer.output_shape) throw LoadError(index, "prelu must preserve its shape");
      expect_param(layer, index, "alpha", {c_in});
      expected_params = 1;
      break;
    case LayerType::DepthToSpace:
      if (layer.block_size < 1) throw LoadError(index, "depth_to_space needs block_size >= 1");
      if (c_in < 0 || c_out < 0 || c_in != c_out * layer.block_size || l_out != l_in * layer.block_size)
        throw LoadError(index, "depth_to_space shapes are inconsistent with block_size");
      break;
    case LayerType::AddSkipMarker:
      if (layer.input_shape != layer.output_shape) throw LoadError(index, "skip markers must preserve their shape");
      break;
    case LayerType::Affine:
      if (layer.input_shape != layer.output_shape) throw LoadError(index, "affine must preserve its shape");
      expect_param(layer, index, "scale", layer.input_shape);
      expect_param(layer, index, "shift", layer.input_shape);
      expected_params = 2;
      break;
  }
  if (layer.params.size() != expected_params) throw LoadError(index, "unexpected extra parameters");
}

std::vector<int> shape_from_json(const json& j, int index, const char* what) {
  if (!j.is_array()) throw LoadError(index, std::string(what) + " must be an array");
  std::vector<int> shape;
  for (const auto& d : j) {
    const int v = d.get<int>();
    if (v <= 0) throw LoadError(index, std::string(what) + " entries must be positive");
    shape.push_back(v);
  }
  return shape;
}

json shape_to_json(const std::vector<int>& shape) { return json(shape); }

std::string manifest_to_json(const GeneratorWeights& w, const std::string& blob_name) {
  json layers = json::array();
  for (const auto& layer : w.layers) {
    json params = json::array();
    for (const auto& p : layer.params) params.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", p.offset}});
    json jl = {{"type", to_string(layer.type)},
               {"name", layer.name},
               {"input_shape", shape_to_json(layer.input_shape)},
               {"output_shape", shape_to_json(layer.output_shape)},
               {"params", params}};
    if (layer.type == LayerType::DepthToSpace) jl["block_size"] = layer.block_size;
    if (layer.type == LayerType::AddSkipMarker) jl["role"] = layer.skip_role == SkipRole::Push ? "push" : "add";
    layers.push_back(jl);
  }
  json m = {{"version", w.version},     {"latent_dim", w.latent_dim}, {"cond_dim", w.cond_dim},
            {"output_dim", w.output_dim}, {"blob_sha256", w.blob_sha256}, {"blob", blob_name},
            {"layers", layers}};
  return m.dump(2);
}

}  // namespace

std::size_t ParamRef::size() const { return product(shape); }

const ParamRef* LayerSpec::param(const std::string& param_name) const {
  for (const auto& p : params)
    if (p.name == param_name) return &p;
  return nullptr;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string blob_sha256(std::span<const float> blob) {
  return sha256_hex({reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size() * sizeof(float)});
}

GeneratorWeights parse_weights(const std::string& manifest_json, std::vector<float> blob) {
  json m;
  try {
    m = json::parse(manifest_json);
  } catch (const json::exception& e) {
    throw LoadError(-1, std::string("manifest is not valid JSON: ") + e.what());
  }

  GeneratorWeights w;
  try {
    w.version = m.at("version").get<int>();
    w.latent_dim = m.at("latent_dim").get<int>();
    w.cond_dim = m.at("cond_dim").get<int>();
    w.output_dim = m.at("output_dim").get<int>();
    w.blob_sha256 = m.at("blob_sha256").get<std::string>();
  } catch (const json::exception& e) {
    throw LoadError(-1, std::string("manifest header: ") + e.what());
  }
  if (w.latent_dim < 1 || w.cond_dim < 1 || w.output_dim < 1) throw LoadError(-1, "manifest dimensions must be positive");
  if (!m.contains("layers") || !m["layers"].is_array() || m["layers"].empty())
    throw LoadError(-1, "manifest has no layers");

  int index = 0;
  for (const auto& jl : m["layers"]) {
    LayerSpec layer;
    try {
      layer.type = parse_layer_type(jl.at("type").get<std::string>(), index);
      layer.name = jl.value("name", std::string{});
      layer.input_shape = shape_from_json(jl.at("input_shape"), index, "input_shape");
      layer.output_shape = shape_from_json(jl.at("output_shape"), index, "output_shape");
      for (const auto& jp : jl.value("params", json::array())) {
        ParamRef p;
        p.name = jp.at("name").get<std::string>();
        p.shape = shape_from_json(jp.at("shape"), index, "param shape");
        p.offset = jp.at("offset").get<std::size_t>();
        layer.params.push_back(std::move(p));
      }
      if (layer.type == LayerType::DepthToSpace) layer.block_size = jl.at("block_size").get<int>();
      if (layer.type == LayerType::AddSkipMarker) {
        const auto role = jl.at("role").get<std::string>();
        if (role == "push") layer.skip_role = SkipRole::Push;
        else if (role == "add") layer.skip_role = SkipRole::Add;
        else throw LoadError(index, "skip marker role must be 'push' or 'add'");
      }
    } catch (const json::exception& e) {
      throw LoadError(index, std::string("malformed layer: ") + e.what());
    }
    validate_layer(layer, index);
    w.layers.push_back(std::move(layer));
    ++index;
  }

  const LayerSpec& first = w.layers.front();
  if (first.type != LayerType::Dense || product(first.input_shape) != static_cast<std::size_t>(w.cond_dim))
    throw LoadError(0, "first layer must be a dense layer consuming cond_dim inputs");

  // Parameters must tile the blob exactly.
  struct Span {
    std::size_t offset, size;
    int layer;
  };
  std::vector<Span> spans;
  for (int li = 0; li < static_cast<int>(w.layers.size()); ++li)
    for (const auto& p : w.layers[li].params) spans.push_back({p.offset, p.size(), li});
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.offset < b.offset; });
  std::size_t cursor = 0;
  for (const auto& s : spans) {
    if (s.offset != cursor)
      throw LoadError(s.layer, s.offset < cursor ? "parameter overlaps the previous one" : "gap before parameter");
    cursor += s.size;
  }
  if (cursor != blob.size()) {
    const int culprit = spans.empty() ? -1 : spans.back().layer;
    throw LoadError(culprit, "parameters cover " + std::to_string(cursor) + " floats but the blob holds " +
                                 std::to_string(blob.size()));
  }
  if (blob_sha256(blob) != w.blob_sha256) throw LoadError(-1, "blob checksum does not match the manifest");
  w.blob = std::move(blob);
  return w;
}

GeneratorWeights load_weights(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw LoadError(-1, "cannot open manifest " + manifest_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::filesystem::path blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  try {
    const json m = json::parse(text);
    if (m.contains("blob")) blob_path = manifest_path.parent_path() / m["blob"].get<std::string>();
  } catch (const json::exception&) {
    // parse_weights reports the malformed manifest
  }

  std::ifstream bin(blob_path, std::ios::binary | std::ios::ate);
  if (!bin) throw LoadError(-1, "cannot open blob " + blob_path.string());
  const auto bytes = static_cast<std::size_t>(bin.tellg());
  if (bytes % sizeof(float) != 0) throw LoadError(-1, "blob size is not a multiple of 4 bytes");
  std::vector<float> blob(bytes / sizeof(float));
  bin.seekg(0);
  bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
  if (!bin) throw LoadError(-1, "failed reading blob " + blob_path.string());
  return parse_weights(text, std::move(blob));
}

void save_weights(const GeneratorWeights& weights, const std::filesystem::path& manifest_path) {
  std::filesystem::path blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  {
    std::ofstream bin(blob_path, std::ios::binary);
    if (!bin) throw IoError("cannot write " + blob_path.string());
    bin.write(reinterpret_cast<const char*>(weights.blob.data()),
              static_cast<std::streamsize>(weights.blob.size() * sizeof(float)));
  }
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest_to_json(weights, blob_path.filename().string()) << '\n';
}

// ---------------------------------------------------------------------------

GeneratorBuilder::GeneratorBuilder(int latent_dim, int cond_dim, int output_dim) {
  weights_.latent_dim = latent_dim;
  weights_.cond_dim = cond_dim;
  weights_.output_dim = output_dim;
}

ParamRef GeneratorBuilder::push(const std::string& name, std::vector<int> shape, const Eigen::VectorXd& values) {
  ParamRef p{name, std::move(shape), weights_.blob.size()};
  if (values.size() != static_cast<Eigen::Index>(p.size()))
    throw ConfigurationError("parameter '" + name + "' value count does not match its shape");
  for (Eigen::Index i = 0; i < values.size(); ++i) weights_.blob.push_back(static_cast<float>(values(i)));
  return p;
}

GeneratorBuilder& GeneratorBuilder::dense(const std::string& name, std::vector<int> input_shape,
                                          std::vector<int> output_shape, const Eigen::MatrixXd& weight,
                                          const Eigen::VectorXd& bias) {
  LayerSpec l;
  l.type = LayerType::Dense;
  l.name = name;
  l.input_shape = std::move(input_shape);
  l.output_shape = std::move(output_shape);
  Eigen::VectorXd flat(weight.size());
  for (Eigen::Index o = 0; o < weight.rows(); ++o)
    for (Eigen::Index i = 0; i < weight.cols(); ++i) flat(o * weight.cols() + i) = weight(o, i);
  l.params.push_back(push("weight", {static_cast<int>(weight.rows()), static_cast<int>(weight.cols())}, flat));
  l.params.push_back(push("bias", {static_cast<int>(bias.size())}, bias));
  weights_.layers.push_back(std::move(l));
  return *this;
}

GeneratorBuilder& GeneratorBuilder::conv1d(const std::string& name, int in_channels, int out_channels, int length,
                                           int kernel, const std::function<double(int, int, int)>& kernel_value,
                                           const Eigen::VectorXd& bias) {
  LayerSpec l;
  l.type = LayerType::Conv1d;
  l.name = name;
  l.input_shape = {in_channels, length};
  l.output_shape = {out_channels, length};
  Eigen::VectorXd flat(static_cast<Eigen::Index>(out_channels) * in_channels * kernel);
  Eigen::Index idx = 0;
  for (int o = 0; o < out_channels; ++o)
    for (int i = 0; i < in_channels; ++i)
      for (int k = 0; k < kernel; ++k) flat(idx++) = kernel_value(o, i, k);
  l.params.push_back(push("weight", {out_channels, in_channels, kernel}, flat));
  l.params.push_back(push("bias", {out_channels}, bias));
  weights_.layers.push_back(std::move(l));
  return *this;
}

GeneratorBuilder& GeneratorBuilder::prelu(const std::string& name, int channels, int length,
                                          const Eigen::VectorXd& alpha) {
  LayerSpec l;
  l.type = LayerType::PRelu;
  l.name = name;
  l.input_shape = {channels, length};
  l.output_shape = {channels, length};
  l.params.push_back(push("alpha", {channels}, alpha));
  weights_.layers.push_back(std::move(l));
  return *this;
}

GeneratorBuilder& GeneratorBuilder::depth_to_space(const std::string& name, int channels_in, int length_in, int block) {
  LayerSpec l;
  l.type = LayerType::DepthToSpace;
  l.name = name;
  l.input_shape = {channels_in, length_in};
  l.output_shape = {channels_in / block, length_in * block};
  l.block_size = block;
  weights_.layers.push_back(std::move(l));
  return *this;
}

GeneratorBuilder& GeneratorBuilder::skip(const std::string& name, SkipRole role, std::vector<int> shape) {
  LayerSpec l;
  l.type = LayerType::AddSkipMarker;
  l.name = name;
  l.input_shape = shape;
  l.output_shape = std::move(shape);
  l.skip_role = role;
  weights_.layers.push_back(std::move(l));
  return *this;
}

GeneratorBuilder& GeneratorBuilder::affine(const std::string& name, std::vector<int> shape,
                                           const Eigen::VectorXd& scale, const Eigen::VectorXd& shift) {
  LayerSpec l;
  l.type = LayerType::Affine;
  l.name = name;
  l.input_shape = shape;
  l.output_shape = shape;
  l.params.push_back(push("scale", shape, scale));
  l.params.push_back(push("shift", shape, shift));
  weights_.layers.push_back(std::move(l));
  return *this;
}

GeneratorWeights GeneratorBuilder::build() const {
  GeneratorWeights w = weights_;
  w.blob_sha256 = blob_sha256(w.blob);
  return parse_weights(manifest_to_json(w, "inline.bin"), w.blob);
}

// ---------------------------------------------------------------------------

namespace {

/// Row-major flattening of a (channels, length) tensor.
Eigen::VectorXd flatten(const Eigen::MatrixXd& t) {
  Eigen::VectorXd out(t.size());
  for (Eigen::Index c = 0; c < t.rows(); ++c)
    for (Eigen::Index x = 0; x < t.cols(); ++x) out(c * t.cols() + x) = t(c, x);
  return out;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int channels, int length) {
  Eigen::MatrixXd t(channels, length);
  for (int c = 0; c < channels; ++c)
    for (int x = 0; x < length; ++x) t(c, x) = v(static_cast<Eigen::Index>(c) * length + x);
  return t;
}

std::vector<double> to_double(std::span<const float> s) { return {s.begin(), s.end()}; }

}  // namespace

Eigen::MatrixXd prelu(const Eigen::MatrixXd& x, std::span<const double> alpha) {
  if (static_cast<Eigen::Index>(alpha.size()) != x.rows()) throw ConfigurationError("prelu alpha/channel mismatch");
  Eigen::MatrixXd out = x;
  for (Eigen::Index c = 0; c < x.rows(); ++c)
    for (Eigen::Index i = 0; i < x.cols(); ++i)
      if (!(x(c, i) > 0)) out(c, i) = alpha[c] * x(c, i);
  return out;
}

Eigen::MatrixXd depth_to_space(const Eigen::MatrixXd& x, int block) {
  if (block < 1 || x.rows() % block != 0) throw ConfigurationError("depth_to_space: channels not divisible by block");
  const Eigen::Index c_out = x.rows() / block;
  Eigen::MatrixXd out(c_out, x.cols() * block);
  for (Eigen::Index c = 0; c < c_out; ++c)
    for (Eigen::Index i = 0; i < x.cols(); ++i)
      for (int s = 0; s < block; ++s) out(c, i * block + s) = x(c * block + s, i);
  return out;
}

Eigen::MatrixXd conv1d_circular(const Eigen::MatrixXd& x, std::span<const float> kernel, std::span<const float> bias,
                                int out_channels, int kernel_width) {
  const Eigen::Index c_in = x.rows();
  const Eigen::Index len = x.cols();
  const int half = kernel_width / 2;
  Eigen::MatrixXd out(out_channels, len);
  for (int o = 0; o < out_channels; ++o) out.row(o).setConstant(bias[o]);
  for (int o = 0; o < out_channels; ++o)
    for (Eigen::Index i = 0; i < c_in; ++i)
      for (int k = 0; k < kernel_width; ++k) {
        const double w = kernel[(static_cast<std::size_t>(o) * c_in + i) * kernel_width + k];
        if (w == 0.0) continue;
        const Eigen::Index shift = k - half;
        for (Eigen::Index p = 0; p < len; ++p) out(o, p) += w * x(i, ((p + shift) % len + len) % len);
      }
  return out;
}

StateVector generator_forward(const GeneratorWeights& weights, double q, const LatentVector& z) {
  if (z.size() != weights.latent_dim) throw InferenceError(0, "latent vector has the wrong dimension");
  if ((z.array().abs() > 1.0).any()) throw InferenceError(0, "latent vector outside [-1, 1]");
  if (weights.cond_dim != 1) throw InferenceError(0, "scalar conditioning requires cond_dim = 1");

  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(1, 1, q);
  std::vector<Eigen::MatrixXd> skips;

  for (int li = 0; li < static_cast<int>(weights.layers.size()); ++li) {
    const LayerSpec& layer = weights.layers[li];
    const auto in_size = product(layer.input_shape);
    if (static_cast<std::size_t>(t.size()) != in_size)
      throw InferenceError(li, "activation has " + std::to_string(t.size()) + " elements, layer expects " +
                                   std::to_string(in_size));
    const auto [c_in, l_in] = as_channels_length(layer.input_shape);
    const auto [c_out, l_out] = as_channels_length(layer.output_shape);
    if (c_in > 0 && (t.rows() != c_in || t.cols() != l_in)) t = unflatten(flatten(t), c_in, l_in);

    switch (layer.type) {
      case LayerType::Dense: {
        const auto w = weights.view(*layer.param("weight"));
        const auto b = weights.view(*layer.param("bias"));
        const Eigen::VectorXd x = flatten(t);
        const auto n_out = static_cast<Eigen::Index>(b.size());
        Eigen::VectorXd y(n_out);
        for (Eigen::Index o = 0; o < n_out; ++o) {
          double acc = b[o];
          for (Eigen::Index i = 0; i < x.size(); ++i) acc += static_cast<double>(w[o * x.size() + i]) * x(i);
          y(o) = acc;
        }
        if (c_out < 0) throw InferenceError(li, "dense output shape must have rank 1 or 2");
        t = unflatten(y, c_out, l_out);
        break;
      }
      case LayerType::Conv1d: {
        const ParamRef* w = layer.param("weight");
        t = conv1d_circular(t, weights.view(*w), weights.view(*layer.param("bias")), c_out, w->shape[2]);
        break;
      }
      case LayerType::PRelu: {
        const auto alpha = to_double(weights.view(*layer.param("alpha")));
        t = prelu(t, alpha);
        break;
      }
      case LayerType::DepthToSpace:
        t = depth_to_space(t, layer.block_size);
        break;
      case LayerType::AddSkipMarker:
        if (layer.skip_role == SkipRole::Push) {
          skips.push_back(t);
        } else {
          if (skips.empty()) throw InferenceError(li, "skip 'add' marker without a matching 'push'");
          if (skips.back().rows() != t.rows() || skips.back().cols() != t.cols())
            throw InferenceError(li, "skip connection shapes differ");
          t += skips.back();
          skips.pop_back();
        }
        break;
      case LayerType::Affine: {
        const auto scale = weights.view(*layer.param("scale"));
        const auto shift = weights.view(*layer.param("shift"));
        Eigen::VectorXd v = flatten(t);
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = v(i) * scale[i] + shift[i];
        t = unflatten(v, c_out, l_out);
        break;
      }
    }

    if (li == 0) {
      // Conditioning embedding joins the latent vector: [embedding, z].
      const Eigen::VectorXd emb = flatten(t);
      Eigen::VectorXd joined(emb.size() + z.size());
      joined << emb, z;
      t = emb.size() == z.size() ? unflatten(joined, 2, static_cast<int>(z.size()))
                                 : unflatten(joined, 1, static_cast<int>(joined.size()));
    }
  }
  if (!skips.empty()) throw InferenceError(static_cast<int>(weights.layers.size()) - 1, "unclosed skip connection");
  if (t.size() != weights.output_dim)
    throw InferenceError(static_cast<int>(weights.layers.size()) - 1, "network output does not match output_dim");
  return flatten(t);
}

// ---------------------------------------------------------------------------

PsoResult pso_minimize(const std::function<double(const LatentVector&)>& objective, int dim, const PsoConfig& config) {
  if (dim < 1 || config.n_particles < 1 || config.n_iterations < 0)
    throw ConfigurationError("invalid PSO dimensions");
  if (!(config.inertia > 0 && config.cognitive > 0 && config.social > 0 && config.velocity_clamp > 0))
    throw ConfigurationError("PSO coefficients must be positive");

  Engine engine(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> r01(0.0, 1.0);
  const int n = config.n_particles;
  const double vmax = config.velocity_clamp;

  std::vector<LatentVector> pos(n, LatentVector(dim)), vel(n, LatentVector(dim));
  PsoResult res;
  res.particle_best_value.resize(n);
  for (int p = 0; p < n; ++p) {
    for (int d = 0; d < dim; ++d) {
      pos[p](d) = unit(engine);
      vel[p](d) = vmax * unit(engine);
    }
  }
  res.particle_best = pos;
  int g = 0;
  for (int p = 0; p < n; ++p) {
    res.particle_best_value[p] = objective(pos[p]);
    if (res.particle_best_value[p] < res.particle_best_value[g]) g = p;
  }
  res.best = res.particle_best[g];
  res.best_value = res.particle_best_value[g];
  res.history.push_back(res.best_value);

  for (int it = 0; it < config.n_iterations; ++it) {
    for (int p = 0; p < n; ++p) {
      for (int d = 0; d < dim; ++d) {
        double v = config.inertia * vel[p](d) +
                   config.cognitive * r01(engine) * (res.particle_best[p](d) - pos[p](d)) +
                   config.social * r01(engine) * (res.best(d) - pos[p](d));
        v = std::clamp(v, -vmax, vmax);
        double x = pos[p](d) + v;
        if (x > 1.0 || x < -1.0) {
          x = std::clamp(x, -1.0, 1.0);
          v = 0.0;
        }
        vel[p](d) = v;
        pos[p](d) = x;
      }
    }
    for (int p = 0; p < n; ++p) {
      const double f = objective(pos[p]);
      if (f < res.particle_best_value[p]) {
        res.particle_best_value[p] = f;
        res.particle_best[p] = pos[p];
      }
    }
    for (int p = 0; p < n; ++p)
      if (res.particle_best_value[p] < res.best_value) {
        res.best_value = res.particle_best_value[p];
        res.best = res.particle_best[p];
      }
    res.history.push_back(res.best_value);
  }
  return res;
}

// ---------------------------------------------------------------------------

std::vector<StateVector> gan_clone(const StateVector& parent, int n_copies, double q, const GeneratorWeights& weights,
                                   PsoConfig pso, bool match_parent, Engine& engine) {
  if (parent.size() != weights.output_dim) throw ConfigurationError("parent dimension does not match the generator");
  if (n_copies < 0) throw ConfigurationError("n_copies must be non-negative");
  if (n_copies == 0) return {};

  if (!match_parent) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<StateVector> out;
    out.reserve(n_copies);
    for (int c = 0; c < n_copies; ++c) {
      LatentVector z(weights.latent_dim);
      for (int d = 0; d < weights.latent_dim; ++d) z(d) = unit(engine);
      out.push_back(generator_forward(weights, q, z));
    }
    return out;
  }

  if (n_copies > pso.n_particles)
    throw ConfigurationError("requested " + std::to_string(n_copies) + " clones from a swarm of " +
                             std::to_string(pso.n_particles));
  pso.seed = engine();
  auto objective = [&](const LatentVector& z) { return (generator_forward(weights, q, z) - parent).norm(); };
  const PsoResult res = pso_minimize(objective, weights.latent_dim, pso);

  std::vector<int> order(res.particle_best.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return res.particle_best_value[a] < res.particle_best_value[b]; });

  auto same = [](const LatentVector& a, const LatentVector& b) { return (a.array() == b.array()).all(); };
  std::vector<LatentVector> chosen;
  std::vector<int> duplicates;
  for (int idx : order) {
    if (static_cast<int>(chosen.size()) == n_copies) break;
    const LatentVector& z = res.particle_best[idx];
    if (std::any_of(chosen.begin(), chosen.end(), [&](const LatentVector& c) { return same(c, z); })) {
      duplicates.push_back(idx);
      continue;
    }
    chosen.push_back(z);
  }
  if (static_cast<int>(chosen.size()) < n_copies) {
    std::cerr << "warning: collapsed swarm, jittering " << n_copies - chosen.size() << " latent vectors\n";
    std::uniform_real_distribution<double> jitter(-1e-4, 1e-4);
    for (std::size_t k = 0; static_cast<int>(chosen.size()) < n_copies; ++k) {
      LatentVector z = res.particle_best[duplicates[k % duplicates.size()]];
      for (int d = 0; d < z.size(); ++d) z(d) = std::clamp(z(d) + jitter(engine), -1.0, 1.0);
      chosen.push_back(std::move(z));
    }
  }

  std::vector<std::pair<double, StateVector>> generated;
  generated.reserve(chosen.size());
  for (const auto& z : chosen) {
    StateVector s = generator_forward(weights, q, z);
    const double d = (s - parent).norm();
    generated.emplace_back(d, std::move(s));
  }
  std::stable_sort(generated.begin(), generated.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<StateVector> out;
  out.reserve(generated.size());
  for (auto& g : generated) out.push_back(std::move(g.second));
  return out;
}

std::vector<StateVector> hybrid_clone(const StateVector& parent, int n_copies, double time,
                                      const GanispCloneConfig& config, const GeneratorWeights& weights,
                                      const PsoConfig& pso, const std::function<double(const StateVector&)>& qoi,
                                      Engine& engine) {
  if (time < config.stationary_onset) return random_clone(parent, n_copies, config.fallback_epsilon, engine);
  return gan_clone(parent, n_copies, qoi(parent), weights, pso, config.match_parent, engine);
}

GanispCloner::GanispCloner(std::shared_ptr<const GeneratorWeights> weights, PsoConfig pso, GanispCloneConfig config,
                           std::function<double(const StateVector&)> qoi)
    : weights_(std::move(weights)), pso_(pso), config_(config), qoi_(std::move(qoi)) {
  if (!weights_) throw ConfigurationError("GANISP cloning needs generator weights");
  if (config_.stationary_onset < 0) throw ConfigurationError("stationary onset must be non-negative");
  if (config_.fallback_epsilon < 0) throw ConfigurationError("fallback epsilon must be non-negative");
}

std::vector<StateVector> GanispCloner::clone(const Realization& parent, int n_copies, double time,
                                             Engine& engine) const {
  return hybrid_clone(parent.state, n_copies, time, config_, *weights_, pso_, qoi_, engine);
}

}  // namespace splitstream
