#pragma once
// Serialization: key=value configs, CSV tables, JSON reports, the KDSMAT01
// binary matrix container and SHA-256 digests.

#include <openssl/evp.h>

#include <boost/program_options.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kds/absorption.hpp"
#include "kds/core.hpp"
#include "kds/dynamics.hpp"
#include "kds/mellin.hpp"
#include "kds/resonances.hpp"
#include "kds/spacetime.hpp"

namespace kds {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- digests

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    raise(ErrorCode::InvalidArgument, "sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hex[md[i] >> 4];
    out[2 * i + 1] = hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::ConfigError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

// ---------------------------------------------------------------- numbers and CSV

// Round-trip decimal form; identical doubles give identical text.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(std::size_t x) { return std::to_string(x); }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    require(row.size() == header.size(), "CsvTable: row width does not match the header");
    rows.push_back(std::move(row));
  }

  std::string str() const {
    auto line = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) s += ',';
        s += v[k];
      }
      return s + '\n';
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
  }
};

// Parse a numeric CSV with a header line; blank lines and '#' comments are skipped.
inline CsvTable read_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) {
      const auto a = cell.find_first_not_of(" \t\r"), b = cell.find_last_not_of(" \t\r");
      out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return out;
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    if (t.header.empty())
      t.header = split(line);
    else
      t.add(split(line));
  }
  if (t.header.empty()) raise(ErrorCode::ConfigError, "read_csv: missing header");
  return t;
}

// ---------------------------------------------------------------- key=value configs

// Reads a flat key=value file against a declared option set; unknown keys,
// malformed lines and bad values raise ConfigError.
inline boost::program_options::variables_map parse_key_value(const std::string& text,
                                                             const boost::program_options::options_description& desc) {
  namespace po = boost::program_options;
  po::variables_map vm;
  try {
    std::istringstream in(text);
    po::store(po::parse_config_file(in, desc, false), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    raise(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
  return vm;
}

// ---------------------------------------------------------------- JSON

inline json to_json_value(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json complex_json(cplx z) { return json{{"re", to_json_value(z.real())}, {"im", to_json_value(z.imag())}}; }

inline json params_json(const SpacetimeParams& p) {
  return json{{"model", to_string(p.model)}, {"lambda", p.lambda}, {"r_s", p.r_s}, {"alpha", p.alpha}, {"n", p.n}};
}

inline json horizon_json(const HorizonData& h) {
  return json{{"r_minus", to_json_value(h.r_minus)},       {"r_plus", to_json_value(h.r_plus)},
              {"gamma_minus", to_json_value(h.gamma_minus)}, {"gamma_plus", to_json_value(h.gamma_plus)},
              {"gamma", to_json_value(h.gamma)},             {"beta_minus", to_json_value(h.beta_minus)},
              {"beta_plus", to_json_value(h.beta_plus)},     {"has_inner", h.has_inner}};
}

inline json admissibility_json(const AdmissibilityReport& r) {
  json d = json::array();
  for (const auto& x : r.diagnostics)
    d.push_back({{"name", x.name}, {"value", to_json_value(x.value)}, {"threshold", to_json_value(x.threshold)}});
  return json{{"horizons_exist", r.horizons_exist},
              {"classical_nontrapping", r.classical_nontrapping},
              {"semiclassical_regime", r.semiclassical_regime},
              {"ergoregions_disjoint", r.ergoregions_disjoint},
              {"error", r.error},
              {"diagnostics", d}};
}

inline json spec_json(const AbsorbingSpec& s) {
  return json{{"mu0", s.mu0},         {"support_hi", s.support_hi}, {"plateau_hi", s.plateau_hi},
              {"plateau_lo", s.plateau_lo}, {"support_lo", s.support_lo}, {"j", s.j},
              {"C", s.C},             {"digamma", s.digamma},       {"stencil", s.stencil}};
}

inline std::string spec_hash(const AbsorbingSpec& s) { return sha256_hex(spec_json(s).dump()); }

inline json resonance_json(const Resonance& r) {
  return json{{"sigma", complex_json(r.sigma)},
              {"multiplicity", r.multiplicity},
              {"convergence_delta", to_json_value(r.convergence_delta)},
              {"spurious_warning", r.spurious_warning},
              {"collar_fraction", r.collar_fraction}};
}

inline json radial_json(const RadialSetReport& r) {
  return json{{"horizon_sign", r.horizon_sign},
              {"kind", r.kind()},
              {"beta0_measured", to_json_value(r.beta0_measured)},
              {"beta0_expected", to_json_value(r.beta0_expected)},
              {"rho0_rate", to_json_value(r.rho0_rate)},
              {"max_rel_deviation", to_json_value(r.max_rel_deviation)},
              {"trajectories", r.trajectories}};
}

inline json decay_json(const DecayFit& f) {
  return json{{"rate", to_json_value(f.rate)},
              {"log_power", to_json_value(f.log_power)},
              {"detected_log_power", f.detected_log_power},
              {"residual", to_json_value(f.residual)},
              {"samples", f.samples}};
}

inline json expansion_json(const Expansion& e) {
  json terms = json::array();
  for (const auto& t : e.terms)
    terms.push_back({{"sigma", complex_json(t.sigma)}, {"kappa", t.kappa}, {"coefficient_norm", t.a.norm()}});
  json poles = json::array();
  for (const auto& L : e.poles) poles.push_back({{"sigma", complex_json(L.sigma)}, {"order", L.order}});
  return json{{"terms", terms}, {"poles", poles}, {"reconstruction", to_json_value(e.reconstruction)}};
}

// ---------------------------------------------------------------- KDSMAT01 container
//
// Layout: 8-byte magic "KDSMAT01", little-endian uint64 header length, the
// JSON header, then each block as column-major complex128 in header order.
// The header lists blocks as {name, rows, cols} plus free-form metadata.

struct MatrixContainer {
  json meta = json::object();
  std::vector<std::pair<std::string, CMat>> blocks;
};

inline constexpr char kMatrixMagic[8] = {'K', 'D', 'S', 'M', 'A', 'T', '0', '1'};

inline std::string encode_matrices(const MatrixContainer& c) {
  json h;
  h["format"] = "KDSMAT01";
  h["dtype"] = "complex128";
  h["order"] = "column-major";
  h["meta"] = c.meta;
  h["blocks"] = json::array();
  for (const auto& [name, M] : c.blocks) h["blocks"].push_back({{"name", name}, {"rows", M.rows()}, {"cols", M.cols()}});
  const std::string head = h.dump();
  std::string out(kMatrixMagic, 8);
  const std::uint64_t len = head.size();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((len >> (8 * b)) & 0xff));
  out += head;
  for (const auto& blk : c.blocks) {
    const CMat& M = blk.second;
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        const double v[2] = {M(i, j).real(), M(i, j).imag()};
        out.append(reinterpret_cast<const char*>(v), sizeof v);
      }
  }
  return out;
}

inline MatrixContainer decode_matrices(const std::string& data) {
  if (data.size() < 16 || std::memcmp(data.data(), kMatrixMagic, 8) != 0)
    raise(ErrorCode::InvalidArgument, "KDSMAT01: bad magic");
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= std::uint64_t(static_cast<unsigned char>(data[8 + b])) << (8 * b);
  if (16 + len > data.size()) raise(ErrorCode::InvalidArgument, "KDSMAT01: truncated header");
  json h;
  try {
    h = json::parse(data.substr(16, len));
  } catch (const json::exception& e) {
    raise(ErrorCode::InvalidArgument, std::string("KDSMAT01: header: ") + e.what());
  }
  MatrixContainer c;
  c.meta = h.at("meta");
  std::size_t pos = 16 + len;
  for (const auto& b : h.at("blocks")) {
    const Eigen::Index r = b.at("rows"), k = b.at("cols");
    const std::size_t bytes = static_cast<std::size_t>(r * k) * 2 * sizeof(double);
    if (pos + bytes > data.size()) raise(ErrorCode::InvalidArgument, "KDSMAT01: truncated data");
    CMat M(r, k);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < r; ++i) {
        double v[2];
        std::memcpy(v, data.data() + pos, sizeof v);
        M(i, j) = cplx(v[0], v[1]);
        pos += sizeof v;
      }
    c.blocks.emplace_back(b.at("name").get<std::string>(), std::move(M));
  }
  if (pos != data.size()) raise(ErrorCode::InvalidArgument, "KDSMAT01: trailing bytes");
  return c;
}

// Pencil coefficients A0, A1, A2 with grid, layout and spec hash.
inline MatrixContainer operator_container(const DiscretizedOperator& op) {
  MatrixContainer c;
  c.meta["params"] = params_json(op.params);
  c.meta["ell"] = op.ell;
  c.meta["N"] = op.N;
  c.meta["variable"] = op.variable();
  c.meta["dimension"] = op.size();
  c.meta["physical_size"] = op.physical_size();
  c.meta["grid"] = std::vector<double>(op.grid.data(), op.grid.data() + op.grid.size());
  c.meta["spec"] = spec_json(op.spec);
  c.meta["spec_hash"] = spec_hash(op.spec);
  for (int k = 0; k < 3; ++k) c.blocks.emplace_back("A" + std::to_string(k), op.A[k]);
  return c;
}

}  // namespace kds
