#include "vibloc/checkpoint.hpp"

#include <bit>
#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace vibloc {

namespace {

constexpr char kMagicPrefix[] = "VIBLOC-CHECKPOINT ";
constexpr char kVersion[] = "v1";

void put_double_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

double get_double_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

[[noreturn]] void parse_fail(std::size_t offset, const std::string& what) {
  throw ParseError("checkpoint parse error at byte offset " +
                   std::to_string(offset) + ": " + what);
}

}  // namespace

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

const std::string& Checkpoint::require_meta(const std::string& key) const {
  const std::string* v = find_meta(key);
  if (!v) throw ConfigError("checkpoint: missing meta key '" + key + "'");
  return *v;
}

const CheckpointRecord* Checkpoint::find_record(const std::string& name) const {
  for (const auto& rec : records) {
    if (rec.name == name) return &rec;
  }
  return nullptr;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

double parse_double(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError(what + ": not a number: '" + s + "'");
  }
  return v;
}

long parse_long(const std::string& s, const std::string& what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError(what + ": not an integer: '" + s + "'");
  }
  return v;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out += kMagicPrefix;
  out += kVersion;
  out += '\n';
  for (const auto& [k, v] : ckpt.meta) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  for (const auto& rec : ckpt.records) {
    out += "@param " + rec.name + " " + std::to_string(rec.values.rows()) +
           " " + std::to_string(rec.values.cols()) + "\n";
    for (Index r = 0; r < rec.values.rows(); ++r) {
      for (Index c = 0; c < rec.values.cols(); ++c) {
        put_double_le(out, rec.values(r, c));
      }
    }
    out += '\n';
  }
  out += "@end\n";

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto read_line = [&](const char* what) {
    const std::size_t nl = buf.find('\n', pos);
    if (nl == std::string::npos) {
      parse_fail(pos, std::string("truncated file while reading ") + what);
    }
    std::string line = buf.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  const std::string magic = read_line("magic line");
  if (magic.rfind(kMagicPrefix, 0) != 0) {
    parse_fail(0, "bad magic line '" + magic + "'");
  }
  const std::string version = magic.substr(std::strlen(kMagicPrefix));
  if (version != kVersion) {
    throw ConfigError("checkpoint: unsupported version '" + version +
                      "', this build reads " + kVersion);
  }

  Checkpoint ckpt;
  bool ended = false;
  while (!ended) {
    const std::size_t line_start = pos;
    const std::string line = read_line("header or record");
    if (line == "@end") {
      ended = true;
    } else if (line.rfind("@param ", 0) == 0) {
      // "@param <name> <rows> <cols>"
      const std::string rest = line.substr(7);
      const std::size_t sp1 = rest.find(' ');
      const std::size_t sp2 =
          sp1 == std::string::npos ? std::string::npos : rest.find(' ', sp1 + 1);
      if (sp1 == std::string::npos || sp2 == std::string::npos) {
        parse_fail(line_start, "malformed @param line '" + line + "'");
      }
      CheckpointRecord rec;
      rec.name = rest.substr(0, sp1);
      long rows = 0, cols = 0;
      try {
        rows = parse_long(rest.substr(sp1 + 1, sp2 - sp1 - 1), "@param rows");
        cols = parse_long(rest.substr(sp2 + 1), "@param cols");
      } catch (const ParseError& e) {
        parse_fail(line_start, e.what());
      }
      if (rows < 0 || cols < 0) {
        parse_fail(line_start, "negative dimensions in '" + line + "'");
      }
      const std::size_t bytes = static_cast<std::size_t>(rows) *
                                static_cast<std::size_t>(cols) * 8;
      if (pos + bytes + 1 > buf.size()) {
        parse_fail(pos, "truncated payload for record '" + rec.name + "'");
      }
      rec.values.resize(rows, cols);
      const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
      for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
          rec.values(r, c) = get_double_le(p);
          p += 8;
        }
      }
      pos += bytes;
      if (buf[pos] != '\n') {
        parse_fail(pos, "missing newline after record '" + rec.name + "'");
      }
      ++pos;
      ckpt.records.push_back(std::move(rec));
    } else {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        parse_fail(line_start, "expected key=value, @param or @end, got '" +
                                   line + "'");
      }
      ckpt.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
  }
  return ckpt;
}

std::vector<std::pair<std::string, std::string>> config_to_meta(
    const VibConfig& cfg) {
  return {
      {"input_dim", std::to_string(cfg.input_dim)},
      {"encoder_hidden", std::to_string(cfg.encoder_hidden)},
      {"latent_dim", std::to_string(cfg.latent_dim)},
      {"predictor_hidden", std::to_string(cfg.predictor_hidden)},
      {"predictor_layers", std::to_string(cfg.predictor_layers)},
      {"dropout_rate", format_double(cfg.dropout_rate)},
      {"beta", format_double(cfg.beta)},
      {"train_mc_samples", std::to_string(cfg.train_mc_samples)},
      {"eval_mc_samples", std::to_string(cfg.eval_mc_samples)},
      {"logvar_lo", format_double(cfg.logvar_lo)},
      {"logvar_hi", format_double(cfg.logvar_hi)},
  };
}

VibConfig config_from_meta(const Checkpoint& ckpt) {
  VibConfig cfg;
  cfg.input_dim = parse_long(ckpt.require_meta("input_dim"), "input_dim");
  cfg.encoder_hidden =
      parse_long(ckpt.require_meta("encoder_hidden"), "encoder_hidden");
  cfg.latent_dim = parse_long(ckpt.require_meta("latent_dim"), "latent_dim");
  cfg.predictor_hidden =
      parse_long(ckpt.require_meta("predictor_hidden"), "predictor_hidden");
  cfg.predictor_layers =
      parse_long(ckpt.require_meta("predictor_layers"), "predictor_layers");
  cfg.dropout_rate =
      parse_double(ckpt.require_meta("dropout_rate"), "dropout_rate");
  cfg.beta = parse_double(ckpt.require_meta("beta"), "beta");
  cfg.train_mc_samples = static_cast<int>(
      parse_long(ckpt.require_meta("train_mc_samples"), "train_mc_samples"));
  cfg.eval_mc_samples = static_cast<int>(
      parse_long(ckpt.require_meta("eval_mc_samples"), "eval_mc_samples"));
  cfg.logvar_lo = parse_double(ckpt.require_meta("logvar_lo"), "logvar_lo");
  cfg.logvar_hi = parse_double(ckpt.require_meta("logvar_hi"), "logvar_hi");
  cfg.validate();
  return cfg;
}

namespace {

VibModel make_empty_model(const VibConfig& cfg) {
  cfg.validate();
  VibModel m;
  m.config = cfg;
  auto zeros = [](Index in, Index out) {
    return DenseLayer{Matrix::Zero(in, out), Matrix::Zero(1, out)};
  };
  m.encoder = zeros(cfg.input_dim, cfg.encoder_hidden);
  m.mu_head = zeros(cfg.encoder_hidden, cfg.latent_dim);
  m.logvar_head = zeros(cfg.encoder_hidden, cfg.latent_dim);
  Index in = cfg.latent_dim;
  for (Index l = 0; l < cfg.predictor_layers; ++l) {
    m.predictor_hidden.push_back(zeros(in, cfg.predictor_hidden));
    m.predictor_dropout.push_back(DropoutLayer{cfg.dropout_rate, {}});
    in = cfg.predictor_hidden;
  }
  m.predictor_out = zeros(in, VibConfig::output_dim);
  return m;
}

void fill_params_from_records(VibModel& model, const Checkpoint& ckpt) {
  const auto names = model.parameter_names();
  const auto params = model.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const CheckpointRecord* rec = ckpt.find_record(names[i]);
    if (!rec) {
      throw ConfigError("checkpoint: missing parameter record '" + names[i] +
                        "'");
    }
    if (rec->values.rows() != params[i]->rows() ||
        rec->values.cols() != params[i]->cols()) {
      throw ConfigError("checkpoint: parameter '" + names[i] + "' is " +
                        shape_str(rec->values) + ", config implies " +
                        shape_str(*params[i]));
    }
    *params[i] = rec->values;
  }
}

}  // namespace

void save_model(const VibModel& model, const std::string& path) {
  Checkpoint ckpt;
  ckpt.meta = config_to_meta(model.config);
  ckpt.meta.emplace_back("kind", "model");
  const auto names = model.parameter_names();
  const auto params = model.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) {
    ckpt.records.push_back({names[i], *params[i]});
  }
  write_checkpoint(ckpt, path);
}

VibModel load_model(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  VibModel model = make_empty_model(config_from_meta(ckpt));
  fill_params_from_records(model, ckpt);
  return model;
}

void save_training_state(const VibModel& model, const AdamState& adam,
                         const std::string& path) {
  Checkpoint ckpt;
  ckpt.meta = config_to_meta(model.config);
  ckpt.meta.emplace_back("kind", "training");
  ckpt.meta.emplace_back("adam.lr", format_double(adam.lr));
  ckpt.meta.emplace_back("adam.beta1", format_double(adam.beta1));
  ckpt.meta.emplace_back("adam.beta2", format_double(adam.beta2));
  ckpt.meta.emplace_back("adam.eps_hat", format_double(adam.eps_hat));
  ckpt.meta.emplace_back("adam.t", std::to_string(adam.t));
  const auto names = model.parameter_names();
  const auto params = model.parameters();
  if (adam.m.size() != names.size() || adam.v.size() != names.size()) {
    throw DimensionError("save_training_state: optimizer tracks " +
                         std::to_string(adam.m.size()) + " params, model has " +
                         std::to_string(names.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    ckpt.records.push_back({names[i], *params[i]});
    ckpt.records.push_back({"adam.m." + names[i], adam.m[i]});
    ckpt.records.push_back({"adam.v." + names[i], adam.v[i]});
  }
  write_checkpoint(ckpt, path);
}

TrainingState load_training_state(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  TrainingState state;
  state.model = make_empty_model(config_from_meta(ckpt));
  fill_params_from_records(state.model, ckpt);
  state.adam.lr = parse_double(ckpt.require_meta("adam.lr"), "adam.lr");
  state.adam.beta1 = parse_double(ckpt.require_meta("adam.beta1"), "adam.beta1");
  state.adam.beta2 = parse_double(ckpt.require_meta("adam.beta2"), "adam.beta2");
  state.adam.eps_hat =
      parse_double(ckpt.require_meta("adam.eps_hat"), "adam.eps_hat");
  state.adam.t = parse_long(ckpt.require_meta("adam.t"), "adam.t");
  for (const std::string& name : state.model.parameter_names()) {
    const CheckpointRecord* m = ckpt.find_record("adam.m." + name);
    const CheckpointRecord* v = ckpt.find_record("adam.v." + name);
    if (!m || !v) {
      throw ConfigError("checkpoint: missing optimizer record for '" + name +
                        "'");
    }
    state.adam.m.push_back(m->values);
    state.adam.v.push_back(v->values);
  }
  return state;
}

}  // namespace vibloc
