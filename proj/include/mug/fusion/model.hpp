#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mug/config.hpp"
#include "mug/dimalign/dimalign.hpp"
#include "mug/error.hpp"
#include "mug/fusion/attention.hpp"
#include "mug/io.hpp"
#include "mug/metamae/metamae.hpp"

namespace mug {

inline constexpr const char* kCheckpointHeader = "MUG-CKPT v1";

// Transferable parameters only; the per-graph struct table and node sample
// are never stored.
struct MugModel {
  DimEncoder dimalign;
  GnnLayer encoder, decoder;
  Attention attention;
  ConfigEcho meta;

  std::size_t k() const { return dimalign.k; }

  void check() const {
    dimalign.check();
    encoder.check();
    decoder.check();
    attention.check();
    const std::size_t k = dimalign.k;
    if (encoder.in_dim() != k || encoder.out_dim() != k || decoder.in_dim() != k || decoder.out_dim() != k || attention.k() != k)
      throw DimensionError("model: layer widths disagree with k=" + std::to_string(k));
  }

  const std::string* meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return &v;
    return nullptr;
  }
};

namespace ckpt {

inline void put_mat(std::string& out, const char* name, const Mat& m) {
  out += std::string(name) + " " + std::to_string(m.rows) + " " + std::to_string(m.cols) + "\n";
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ' ';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
}

class Reader {
 public:
  explicit Reader(const std::string& text) : lines_(lines_of(text)) {}

  bool done() const { return pos_ >= lines_.size(); }
  std::size_t line_no() const { return pos_ + 1; }
  const std::string& peek() const {
    if (done()) fail("unexpected end of checkpoint");
    return lines_[pos_];
  }
  const std::string& next() {
    const std::string& l = peek();
    ++pos_;
    return l;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw SchemaError("checkpoint line " + std::to_string(std::min(pos_ + 1, lines_.size() + 1)) + ": " + msg); }

  void expect(const std::string& line) {
    if (next() != line) {
      --pos_;
      fail("expected '" + line + "'");
    }
  }

  // "key value" with the given key.
  std::string field(const std::string& key) {
    const std::string& l = next();
    if (l.rfind(key + " ", 0) != 0) {
      --pos_;
      fail("expected field '" + key + "'");
    }
    return l.substr(key.size() + 1);
  }

  std::size_t count(const std::string& key) {
    const std::string v = field(key);
    const auto x = parse_int<std::size_t>(v);
    if (!x) {
      --pos_;
      fail("field '" + key + "' is not a count");
    }
    return *x;
  }

  Mat mat(const std::string& name) {
    const auto parts = split(field(name), ' ');
    std::optional<std::size_t> r, c;
    if (parts.size() == 2) {
      r = parse_int<std::size_t>(parts[0]);
      c = parse_int<std::size_t>(parts[1]);
    }
    if (!r || !c) {
      --pos_;
      fail("matrix '" + name + "' needs a 'rows cols' shape");
    }
    Mat m(*r, *c);
    for (std::size_t i = 0; i < *r; ++i) {
      const auto vals = split(next(), ' ');
      if (vals.size() != *c) {
        --pos_;
        fail("matrix '" + name + "' row " + std::to_string(i) + " has " + std::to_string(vals.size()) + " values, expected " + std::to_string(*c));
      }
      for (std::size_t j = 0; j < *c; ++j) {
        const auto v = parse_double(vals[j]);
        if (!v || !std::isfinite(*v)) {
          --pos_;
          fail("matrix '" + name + "' has a non-numeric or non-finite entry");
        }
        m(i, j) = *v;
      }
    }
    return m;
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace ckpt

inline std::string serialize_model(const MugModel& m) {
  m.check();
  std::string out = std::string(kCheckpointHeader) + "\n";
  out += "[dimalign]\n";
  out += "n_s " + std::to_string(m.dimalign.sample_size) + "\n";
  out += "k " + std::to_string(m.dimalign.k) + "\n";
  out += "hidden " + std::to_string(m.dimalign.hidden) + "\n";
  if (m.dimalign.hidden > 0) {
    ckpt::put_mat(out, "W_hidden", m.dimalign.W_hidden);
    ckpt::put_mat(out, "b_hidden", m.dimalign.b_hidden);
  }
  ckpt::put_mat(out, "W", m.dimalign.W);
  ckpt::put_mat(out, "b", m.dimalign.b);
  for (const auto& [name, layer] : {std::pair{"encoder", &m.encoder}, std::pair{"decoder", &m.decoder}}) {
    out += std::string("[") + name + "]\n";
    out += std::string("activation ") + activation_name(layer->activation) + "\n";
    ckpt::put_mat(out, "weight", layer->weight);
    ckpt::put_mat(out, "bias", layer->bias);
  }
  out += "[attention]\n";
  ckpt::put_mat(out, "q", m.attention.q);
  ckpt::put_mat(out, "W", m.attention.W);
  ckpt::put_mat(out, "b", m.attention.b);
  out += "[meta]\n";
  for (const auto& [k, v] : m.meta) {
    if (k.empty() || k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) throw SchemaError("checkpoint meta entry '" + k + "' is not serializable");
    out += k + " " + v + "\n";
  }
  return out;
}

inline MugModel parse_model(const std::string& text) {
  ckpt::Reader r(text);
  MugModel m;
  r.expect(kCheckpointHeader);
  r.expect("[dimalign]");
  m.dimalign.sample_size = r.count("n_s");
  m.dimalign.k = r.count("k");
  m.dimalign.hidden = r.count("hidden");
  if (m.dimalign.hidden > 0) {
    m.dimalign.W_hidden = r.mat("W_hidden");
    m.dimalign.b_hidden = r.mat("b_hidden");
  }
  m.dimalign.W = r.mat("W");
  m.dimalign.b = r.mat("b");
  for (auto [name, layer] : {std::pair{"encoder", &m.encoder}, std::pair{"decoder", &m.decoder}}) {
    r.expect(std::string("[") + name + "]");
    try {
      layer->activation = parse_activation(r.field("activation"));
    } catch (const SchemaError& e) {
      r.fail(e.what());
    }
    layer->weight = r.mat("weight");
    layer->bias = r.mat("bias");
  }
  r.expect("[attention]");
  m.attention.q = r.mat("q");
  m.attention.W = r.mat("W");
  m.attention.b = r.mat("b");
  r.expect("[meta]");
  while (!r.done()) {
    const std::string& l = r.next();
    const auto sp = l.find(' ');
    if (sp == std::string::npos || sp == 0) r.fail("meta entries are 'key value'");
    m.meta.emplace_back(l.substr(0, sp), l.substr(sp + 1));
  }
  try {
    m.check();
  } catch (const DimensionError& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
  return m;
}

inline void save_model(const MugModel& m, const std::filesystem::path& path) { write_file(path, serialize_model(m)); }
inline MugModel load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

inline std::uint64_t model_hash(const MugModel& m) { return fnv1a(serialize_model(m)); }

}  // namespace mug
