#include "cpt/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cpt {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

int parse_int_field(const std::string& token, const std::string& field) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(field, &pos);
    if (pos != field.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("layer '" + token + "': bad integer field '" + field + "'");
  }
}

}  // namespace

LayerSpec LayerSpec::parse(const std::string& token) {
  auto fields = split(token, ':');
  if (fields.empty() || fields[0].empty())
    throw std::invalid_argument("layer '" + token + "': empty spec");
  const std::string& name = fields[0];
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (fields.size() - 1 < lo || fields.size() - 1 > hi)
      throw std::invalid_argument("layer '" + token + "': wrong number of fields");
  };
  LayerSpec s;
  if (name == "conv") {
    arity(3, 5);
    s.kind = Kind::conv;
    s.in = parse_int_field(token, fields[1]);
    s.out = parse_int_field(token, fields[2]);
    s.k = parse_int_field(token, fields[3]);
    s.stride = fields.size() > 4 ? parse_int_field(token, fields[4]) : 1;
    s.pad = fields.size() > 5 ? parse_int_field(token, fields[5]) : 0;
    if (s.in < 1 || s.out < 1 || s.k < 1 || s.stride < 1 || s.pad < 0)
      throw std::invalid_argument("layer '" + token + "': fields out of range");
  } else if (name == "linear") {
    arity(2, 2);
    s.kind = Kind::linear;
    s.in = parse_int_field(token, fields[1]);
    s.out = parse_int_field(token, fields[2]);
    if (s.in < 1 || s.out < 1)
      throw std::invalid_argument("layer '" + token + "': fields out of range");
  } else if (name == "relu") {
    arity(0, 0);
    s.kind = Kind::relu;
  } else if (name == "avgpool") {
    arity(1, 1);
    s.kind = Kind::avgpool;
    s.k = parse_int_field(token, fields[1]);
    if (s.k < 1) throw std::invalid_argument("layer '" + token + "': kernel must be >= 1");
  } else if (name == "flatten") {
    arity(0, 0);
    s.kind = Kind::flatten;
  } else {
    throw std::invalid_argument("layer '" + token + "': unknown layer kind '" + name + "'");
  }
  return s;
}

std::string LayerSpec::to_string() const {
  switch (kind) {
    case Kind::conv:
      return "conv:" + std::to_string(in) + ":" + std::to_string(out) + ":" + std::to_string(k) +
             ":" + std::to_string(stride) + ":" + std::to_string(pad);
    case Kind::linear: return "linear:" + std::to_string(in) + ":" + std::to_string(out);
    case Kind::relu: return "relu";
    case Kind::avgpool: return "avgpool:" + std::to_string(k);
    case Kind::flatten: return "flatten";
  }
  throw std::logic_error("unreachable");
}

std::vector<LayerSpec> parse_layer_list(const std::string& comma_separated) {
  std::vector<LayerSpec> out;
  for (const std::string& token : split(comma_separated, ','))
    if (!token.empty()) out.push_back(LayerSpec::parse(token));
  if (out.empty()) throw std::invalid_argument("layer list is empty");
  return out;
}

std::vector<LayerSpec> preset_layers(const std::string& name,
                                     const std::vector<std::int64_t>& input_shape,
                                     std::int64_t classes) {
  auto flat_size = [&]() -> std::int64_t {
    std::int64_t n = shape_product(input_shape);
    if (n < 1) throw std::invalid_argument("preset " + name + ": empty input shape");
    return n;
  };
  if (name == "cnn6") {
    if (input_shape != std::vector<std::int64_t>{1, 16, 16})
      throw std::invalid_argument("preset cnn6 expects input shape [1,16,16]");
    return parse_layer_list(
        "conv:1:16:3:1:1,relu,avgpool:2,"
        "conv:16:32:3:1:1,relu,avgpool:2,"
        "conv:32:64:3:1:1,relu,flatten,"
        "linear:1024:128,relu,linear:128:" +
        std::to_string(classes));
  }
  if (name == "mlp3") {
    std::int64_t d = flat_size();
    std::string head = input_shape.size() > 1 ? "flatten," : "";
    return parse_layer_list(head + "linear:" + std::to_string(d) +
                            ":64,relu,linear:64:64,relu,linear:64:" + std::to_string(classes));
  }
  if (name == "linear_probe") {
    std::int64_t d = flat_size();
    std::string head = input_shape.size() > 1 ? "flatten," : "";
    return parse_layer_list(head + "linear:" + std::to_string(d) + ":" + std::to_string(classes));
  }
  throw std::invalid_argument("unknown model preset: " + name);
}

Model::Model(std::vector<LayerSpec> layers, std::vector<std::int64_t> input_shape)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)) {
  if (layers_.empty()) throw std::invalid_argument("model: layer list is empty");
  std::vector<std::int64_t> cur = input_shape_;
  auto shape_str = [](const std::vector<std::int64_t>& s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
    return r + "]";
  };
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const LayerSpec& l = layers_[li];
    std::uint64_t macs = 0;
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        if (cur.size() != 3 || cur[0] != l.in)
          throw std::invalid_argument("model: layer " + l.to_string() +
                                      " cannot take input of shape " + shape_str(cur));
        std::int64_t oh = (cur[1] + 2 * l.pad - l.k) / l.stride + 1;
        std::int64_t ow = (cur[2] + 2 * l.pad - l.k) / l.stride + 1;
        if (cur[1] + 2 * l.pad < l.k || cur[2] + 2 * l.pad < l.k || oh < 1 || ow < 1)
          throw std::invalid_argument("model: layer " + l.to_string() +
                                      " kernel exceeds input " + shape_str(cur));
        macs = conv2d_macs(1, cur[0], cur[1], cur[2], l.out, l.k, l.k, l.stride, l.pad);
        params_.push_back(Tensor({l.out, l.in, l.k, l.k}));
        params_.push_back(Tensor({l.out}));
        cur = {l.out, oh, ow};
        break;
      }
      case LayerSpec::Kind::linear: {
        if (cur.size() != 1 || cur[0] != l.in)
          throw std::invalid_argument("model: layer " + l.to_string() +
                                      " cannot take input of shape " + shape_str(cur) +
                                      (cur.size() > 1 ? " (missing flatten?)" : ""));
        macs = linear_macs(1, l.in, l.out);
        params_.push_back(Tensor({l.in, l.out}));
        params_.push_back(Tensor({l.out}));
        cur = {l.out};
        break;
      }
      case LayerSpec::Kind::relu:
        break;
      case LayerSpec::Kind::avgpool: {
        if (cur.size() != 3)
          throw std::invalid_argument("model: avgpool needs a [C,H,W] input, got " +
                                      shape_str(cur));
        std::int64_t oh = cur[1] / l.k, ow = cur[2] / l.k;
        if (oh < 1 || ow < 1)
          throw std::invalid_argument("model: avgpool kernel exceeds input " + shape_str(cur));
        cur = {cur[0], oh, ow};
        break;
      }
      case LayerSpec::Kind::flatten:
        if (cur.size() < 2)
          throw std::invalid_argument("model: flatten needs a multi-dim input, got " +
                                      shape_str(cur));
        cur = {shape_product(cur)};
        break;
    }
    layer_macs_.push_back(macs);
    macs_per_sample_ += macs;
  }
  if (cur.size() != 1 || layers_.back().kind != LayerSpec::Kind::linear)
    throw std::invalid_argument("model: last layer must be linear (the classifier head)");
  num_classes_ = cur[0];
}

void Model::init_params(Rng& rng) {
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    if (p.ndim() == 1) {
      p.fill(0.0);  // bias
      continue;
    }
    std::int64_t fan_in = p.ndim() == 4 ? p.dim(1) * p.dim(2) * p.dim(3) : p.dim(0);
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] = rng.uniform(-bound, bound);
  }
}

std::int64_t Model::param_count() const {
  std::int64_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

ForwardResult Model::forward(Tape& tp, const Tensor& batch, const ForwardOptions& opt) const {
  if (batch.ndim() != static_cast<int>(input_shape_.size()) + 1)
    throw std::invalid_argument("model: batch rank does not match input shape");
  for (std::size_t i = 0; i < input_shape_.size(); ++i)
    if (batch.dim(static_cast<int>(i) + 1) != input_shape_[i])
      throw std::invalid_argument("model: batch shape does not match input shape " +
                                  batch.shape_string());
  if (opt.training && opt.bw_bits < 32 && opt.rng == nullptr)
    throw std::invalid_argument("model: training with bw_bits < 32 requires an Rng");
  std::int64_t N = batch.dim(0);

  ForwardResult fr;
  Var x = tp.leaf(batch, false);
  if (opt.quantize_input && opt.fw_bits < 32) {
    QuantSpec qs{opt.input_signed ? QuantKind::max_scale_signed : QuantKind::max_scale_unsigned,
                 opt.fw_bits, Rounding::nearest_even};
    x = fake_quantize(tp, x, qs);
  }

  std::size_t pi = 0;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const LayerSpec& l = layers_[li];
    switch (l.kind) {
      case LayerSpec::Kind::conv:
      case LayerSpec::Kind::linear: {
        Var w = tp.leaf(params_[pi], opt.training);
        fr.param_vars.push_back(w);
        ++pi;
        Var b = tp.leaf(params_[pi], opt.training);
        fr.param_vars.push_back(b);
        ++pi;
        Var wq = w;
        if (opt.fw_bits < 32) {
          QuantSpec qs{opt.weight_kind, opt.fw_bits, Rounding::nearest_even};
          wq = fake_quantize(tp, w, qs);
        }
        Var y = l.kind == LayerSpec::Kind::conv ? conv2d(tp, x, wq, l.stride, l.pad)
                                                : matmul(tp, x, wq);
        y = add_bias(tp, y, b);
        if (opt.training) {
          if (opt.ledger)
            opt.ledger->add_training_macs(layer_macs_[li] * static_cast<std::uint64_t>(N),
                                          opt.fw_bits, opt.fw_bits, opt.bw_bits);
          if (opt.bw_bits < 32) y = quantize_upstream_grad(tp, y, opt.bw_bits, *opt.rng);
        }
        x = y;
        break;
      }
      case LayerSpec::Kind::relu: {
        x = relu(tp, x);
        if (opt.fw_bits < 32) {
          QuantSpec qs{QuantKind::max_scale_unsigned, opt.fw_bits, Rounding::nearest_even};
          x = fake_quantize(tp, x, qs);
        }
        break;
      }
      case LayerSpec::Kind::avgpool:
        x = avgpool2d(tp, x, l.k);
        break;
      case LayerSpec::Kind::flatten:
        x = flatten(tp, x);
        break;
    }
  }
  fr.logits = x;
  return fr;
}

}  // namespace cpt
