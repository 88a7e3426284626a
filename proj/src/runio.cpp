#include "dsw/runio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dsw/errors.hpp"
#include "dsw/regcalc.hpp"

namespace dsw {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Deterministic text output.

std::string format_sci(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

double fixed_precision(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_sci(v).c_str(), nullptr);
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") != std::string::npos) {
      out += '"';
      for (char c : f) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += f;
    }
  }
  out += "\r\n";
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::string out = csv_row(header);
  for (const auto& r : rows) out += csv_row(r);
  write_text(path, out);
}

void write_dat(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::string out = "#";
  for (const auto& h : header) out += " " + h;
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      out += (i ? " " : "") + format_sci(r[i]);
    out += "\n";
  }
  write_text(path, out);
}

void write_text(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw ConfigError("short write to '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_json(const std::string& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

Json read_json(const std::string& path) {
  Json j = Json::parse(read_text(path), nullptr, false);
  if (j.is_discarded())
    throw ConfigError("'" + path + "' is not valid JSON");
  return j;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Grid-field binary I/O.

namespace {

constexpr char kFieldMagic[8] = {'D', 'S', 'W', 'F', 'L', 'D', '1', '\n'};
constexpr char kHalfMagic[8] = {'D', 'S', 'W', 'H', 'S', 'F', '1', '\n'};

void append_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void append_i64(std::string& out, std::int64_t v) { append_bytes(out, &v, 8); }
void append_f64(std::string& out, double v) { append_bytes(out, &v, 8); }

struct ByteReader {
  const std::string& bytes;
  std::size_t pos = 0;
  const std::string& path;

  void read(void* p, std::size_t n) {
    if (pos + n > bytes.size())
      throw ConfigError("field file '" + path + "' is truncated");
    std::memcpy(p, bytes.data() + pos, n);
    pos += n;
  }
  std::int64_t i64() {
    std::int64_t v;
    read(&v, 8);
    return v;
  }
  double f64() {
    double v;
    read(&v, 8);
    return v;
  }
};

}  // namespace

void write_field(const std::string& stem, const GridField& f,
                 const Json& problem) {
  std::string bytes;
  bytes.reserve(64 + 8 * (f.times.size() + f.values.size()));
  append_bytes(bytes, kFieldMagic, 8);
  append_i64(bytes, static_cast<std::int64_t>(f.times.size()));
  append_i64(bytes, f.n_mu);
  append_f64(bytes, f.mu_min);
  append_f64(bytes, f.mu_max);
  append_f64(bytes, f.weight_tag);
  for (double t : f.times) append_f64(bytes, t);
  append_bytes(bytes, f.values.data(), 8 * f.values.size());
  write_text(stem + ".bin", bytes);

  Json side;
  side["format"] = "dswave-field-1";
  side["binary"] = fs::path(stem + ".bin").filename().string();
  side["n_times"] = f.times.size();
  side["n_mu"] = f.n_mu;
  side["mu_min"] = fixed_precision(f.mu_min);
  side["mu_max"] = fixed_precision(f.mu_max);
  side["weight_tag"] = fixed_precision(f.weight_tag);
  side["payload_hash"] = fnv1a_hex(bytes);
  side["problem"] = problem;
  write_json(stem + ".json", side);
}

GridField read_field(const std::string& stem) {
  const std::string path = stem + ".bin";
  const std::string bytes = read_text(path);
  ByteReader r{bytes, 0, path};
  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kFieldMagic, 8) != 0)
    throw ConfigError("'" + path + "' is not a grid-field file");
  GridField f;
  const std::int64_t nt = r.i64();
  f.n_mu = static_cast<int>(r.i64());
  f.mu_min = r.f64();
  f.mu_max = r.f64();
  f.weight_tag = r.f64();
  if (nt < 0 || f.n_mu <= 0 ||
      bytes.size() != 56 + 8 * static_cast<std::size_t>(nt) * (1 + f.n_mu))
    throw ConfigError("field file '" + path + "' has inconsistent sizes");
  f.times.resize(static_cast<std::size_t>(nt));
  f.values.resize(static_cast<std::size_t>(nt) * f.n_mu);
  r.read(f.times.data(), 8 * f.times.size());
  r.read(f.values.data(), 8 * f.values.size());
  return f;
}

void write_half_field(const std::string& stem, const HalfSpaceField& f,
                      const Json& problem) {
  std::string bytes;
  bytes.reserve(64 + 16 * f.values.size());
  append_bytes(bytes, kHalfMagic, 8);
  append_i64(bytes, f.grid.n);
  append_i64(bytes, f.grid.Nt);
  append_i64(bytes, f.grid.Ny);
  append_f64(bytes, f.grid.T);
  append_f64(bytes, f.grid.L);
  for (const auto& z : f.values) {
    append_f64(bytes, z.real());
    append_f64(bytes, z.imag());
  }
  write_text(stem + ".bin", bytes);

  Json side;
  side["format"] = "dswave-halfspace-1";
  side["binary"] = fs::path(stem + ".bin").filename().string();
  side["n"] = f.grid.n;
  side["T"] = fixed_precision(f.grid.T);
  side["Nt"] = f.grid.Nt;
  side["L"] = fixed_precision(f.grid.L);
  side["Ny"] = f.grid.Ny;
  side["payload_hash"] = fnv1a_hex(bytes);
  side["problem"] = problem;
  write_json(stem + ".json", side);
}

HalfSpaceField read_half_field(const std::string& stem) {
  const std::string path = stem + ".bin";
  const std::string bytes = read_text(path);
  ByteReader r{bytes, 0, path};
  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kHalfMagic, 8) != 0)
    throw ConfigError("'" + path + "' is not a half-space field file");
  HalfSpaceField f;
  f.grid.n = static_cast<int>(r.i64());
  f.grid.Nt = static_cast<int>(r.i64());
  f.grid.Ny = static_cast<int>(r.i64());
  f.grid.T = r.f64();
  f.grid.L = r.f64();
  const std::size_t m = f.grid.size();
  if (bytes.size() != 48 + 16 * m)
    throw ConfigError("field file '" + path + "' has inconsistent sizes");
  f.values.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double re = r.f64();
    const double im = r.f64();
    f.values[i] = {re, im};
  }
  return f;
}

// ---------------------------------------------------------------------------
// Result serialization.

Json entries_json(const std::vector<LatticeEntry>& entries) {
  Json arr = Json::array();
  for (const auto& e : entries) {
    Json j;
    j["re"] = fixed_precision(e.sigma.real());
    j["im"] = fixed_precision(e.sigma.imag());
    j["multiplicity"] = e.multiplicity;
    arr.push_back(std::move(j));
  }
  return arr;
}

Json lattice_json(const ResonanceLattice& lat) {
  Json j;
  j["n"] = lat.n;
  j["lambda"] = fixed_precision(lat.lambda);
  j["entries"] = entries_json(lat.entries);
  return j;
}

Json fit_json(const DecayFit& fit) {
  Json j;
  j["model"] = to_string(fit.model);
  j["exponent"] = fixed_precision(fit.exponent);
  j["frequency"] = fixed_precision(fit.frequency);
  j["log_correction"] = fit.log_correction;
  j["amplitude"] = fixed_precision(fit.amplitude);
  j["constant"] = fixed_precision(fit.constant);
  j["residual"] = fixed_precision(fit.residual);
  j["window"] = {fixed_precision(fit.t_lo), fixed_precision(fit.t_hi)};
  return j;
}

Json iteration_json(const IterationReport& rep) {
  Json j;
  j["iterates"] = rep.iterates;
  Json deltas = Json::array();
  for (double d : rep.deltas) deltas.push_back(fixed_precision(d));
  j["deltas"] = std::move(deltas);
  Json ratios = Json::array();
  for (double r : rep.contraction_ratios) ratios.push_back(fixed_precision(r));
  j["contraction_ratios"] = std::move(ratios);
  j["forcing_norm"] = fixed_precision(rep.forcing_norm);
  j["final_residual"] = fixed_precision(rep.final_residual);
  j["strengthened"] = rep.strengthened;
  return j;
}

Json scan_json(const ScanReport& rep) {
  Json j;
  j["total"] = rep.total;
  j["reached_H1"] = rep.reached_H1;
  j["reached_H2"] = rep.reached_H2;
  j["converged_radial"] = rep.converged_radial;
  j["neighborhood_hits"] = rep.neighborhood_hits;
  j["failures"] = rep.failures;
  j["nontrapping"] = rep.failures.empty();
  return j;
}

// ---------------------------------------------------------------------------
// Config resolution.

namespace {

bool type_matches(const Json& v, const std::string& type) {
  if (type == "int") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "bool") return v.is_boolean();
  if (type == "string") return v.is_string();
  if (type == "array") return v.is_array();
  if (type == "object") return v.is_object();
  throw ConfigError("unknown schema type '" + type + "'");
}

}  // namespace

Json resolve_config(const Json& cfg, const std::vector<KeySpec>& schema) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : cfg.items()) {
    const bool known =
        std::any_of(schema.begin(), schema.end(),
                    [&](const KeySpec& ks) { return ks.key == item.key(); });
    if (!known) throw ConfigError("unknown config key '" + item.key() + "'");
  }
  Json out = Json::object();
  for (const auto& ks : schema) {
    if (cfg.contains(ks.key)) {
      const Json& v = cfg.at(ks.key);
      if (!type_matches(v, ks.type))
        throw ConfigError("config key '" + ks.key + "' must be of type " +
                          ks.type);
      out[ks.key] = v;
    } else if (!ks.fallback.is_null()) {
      out[ks.key] = ks.fallback;
    } else {
      throw ConfigError("missing required config key '" + ks.key + "'");
    }
  }
  return out;
}

void apply_override(Json& cfg, const std::string& path,
                    const std::string& value) {
  if (path.empty()) throw ConfigError("empty override key");
  Json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad override key '" + path + "'");
    if (dot == std::string::npos) {
      Json parsed = Json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? Json(value) : parsed;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object())
      (*node)[part] = Json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

void apply_env_overrides(Json& cfg, const std::vector<KeySpec>& schema) {
  for (const auto& ks : schema) {
    std::string name = "DSWAVE_";
    for (char c : ks.key)
      name += c == '.' ? '_' : static_cast<char>(std::toupper(
                                   static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(name.c_str()))
      apply_override(cfg, ks.key, v);
  }
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const Json& config, double wall_ms,
                    const std::vector<std::string>& artifacts) {
  Json m;
  m["format"] = "dswave-manifest-1";
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = fnv1a_hex(command + "\n" + config.dump());
  Json versions;
  versions["dswave"] = "0.3.0";
  versions["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                     std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                     std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  versions["compiler"] = __VERSION__;
  m["versions"] = std::move(versions);
  m["wall_ms"] = std::round(wall_ms * 10.0) / 10.0;
  m["artifacts"] = artifacts;
  write_json(out_dir + "/manifest.json", m);
}

Json unwrap_manifest(const Json& j, const std::string& command) {
  if (!j.is_object() || !j.contains("command") || !j.contains("config"))
    return j;
  if (!j.at("command").is_string() || j.at("command") != command)
    throw ConfigError("manifest was produced by '" +
                      j.at("command").get<std::string>() + "', not '" +
                      command + "'");
  return j.at("config");
}

// ---------------------------------------------------------------------------
// regcheck expression language.

namespace {

struct Token {
  enum Kind { Ident, Int, Punct, End } kind = End;
  std::string text;
  long long num = 0;
};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) ||
              src[j] == '_' || src[j] == '\''))
        ++j;
      out.push_back({Token::Ident, src.substr(i, j - i), 0});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() &&
             std::isdigit(static_cast<unsigned char>(src[j])))
        ++j;
      Token t{Token::Int, src.substr(i, j - i), 0};
      t.num = std::strtoll(t.text.c_str(), nullptr, 10);
      out.push_back(std::move(t));
      i = j;
      continue;
    }
    if ((c == '>' || c == '<') && i + 1 < src.size() && src[i + 1] == '=') {
      out.push_back({Token::Punct, src.substr(i, 2), 0});
      i += 2;
      continue;
    }
    if (std::strchr("()[],;=+-*/&<>", c)) {
      out.push_back({Token::Punct, std::string(1, c), 0});
      ++i;
      continue;
    }
    throw ConfigError(std::string("regcheck: unexpected character '") + c +
                      "'");
  }
  out.push_back(Token{});
  return out;
}

// Renders a rational through the expression printer (so "7/2", "-3", ...).
std::string rat_str(const Rat& r) { return LinExpr(r).str(); }

// The threshold bounds carry the single reserved symbol nu = n/2; render it
// in the conventional spelling.
std::string render_nu(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool word_start = i == 0 || !std::isalnum(static_cast<unsigned char>(
                                          s[i - 1]));
    if (word_start && s.compare(i, 2, "nu") == 0 &&
        (i + 2 == s.size() ||
         !std::isalnum(static_cast<unsigned char>(s[i + 2])))) {
      out += "n/2";
      i += 2;
      continue;
    }
    out += s[i++];
  }
  return out;
}

class RegcheckParser {
 public:
  explicit RegcheckParser(const std::string& src) : toks_(lex(src)) {}

  Json eval(const std::string& query);

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  // Parsed arguments.
  std::vector<OperatorClass> classes_;
  std::map<std::string, Rat> values_;
  std::vector<Ineq> assume_;
  bool has_assume_ = false;
  std::set<std::string> consumed_;

  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = pos_ + ahead;
    return toks_[i < toks_.size() ? i : toks_.size() - 1];
  }
  bool is_punct(const Token& t, const char* p) const {
    return t.kind == Token::Punct && t.text == p;
  }
  [[noreturn]] void fail(const std::string& what) const {
    const std::string where =
        peek().kind == Token::End ? "end of input" : "'" + peek().text + "'";
    throw ConfigError("regcheck: " + what + " at " + where);
  }
  void expect(const char* p) {
    if (!is_punct(peek(), p)) fail(std::string("expected '") + p + "'");
    ++pos_;
  }

  Rat parse_rat();
  LinExpr parse_sym_scaled();
  LinExpr parse_lin_term();
  LinExpr parse_lin_expr();
  Ineq parse_ineq();
  SobolevOrder parse_order();
  ClassAtom parse_atom();
  OperatorClass parse_class();
  bool at_class_start() const;
  void parse_args();

  // Keyword accessors; every access marks the key consumed so stray keys can
  // be reported.
  Rat need_rat(const std::string& key);
  Rat rat_or(const std::string& key, Rat def);
  long long need_int(const std::string& key);
  std::optional<long long> opt_int(const std::string& key);
  std::vector<Ineq> take_assume();

  Json eval_compose();
  Json eval_map();
  Json eval_threshold();
  Json eval_radial();
  Json eval_weight_shift();
};

Rat RegcheckParser::parse_rat() {
  bool neg = false;
  if (is_punct(peek(), "-")) {
    neg = true;
    ++pos_;
  }
  if (peek().kind != Token::Int) fail("expected a number");
  const long long num = peek().num;
  ++pos_;
  long long den = 1;
  if (is_punct(peek(), "/") && peek(1).kind == Token::Int) {
    ++pos_;
    den = peek().num;
    ++pos_;
    if (den == 0) fail("zero denominator");
  }
  const Rat r(num, den);
  return neg ? -r : r;
}

LinExpr RegcheckParser::parse_sym_scaled() {
  const std::string name = peek().text;
  ++pos_;
  if (name == "inf") fail("'inf' is only valid as a Sobolev order");
  LinExpr e = name == "nu"  ? LinExpr::nu()
              : name == "n" ? LinExpr::nu() * Rat(2)
                            : LinExpr::var(name);
  while (is_punct(peek(), "/")) {
    if (peek(1).kind != Token::Int) fail("expected an integer divisor");
    ++pos_;
    if (peek().num == 0) fail("zero denominator");
    e = e * Rat(1, peek().num);
    ++pos_;
  }
  return e;
}

LinExpr RegcheckParser::parse_lin_term() {
  if (peek().kind == Token::Int) {
    const Rat c = parse_rat();
    if (is_punct(peek(), "*")) {
      ++pos_;
      if (peek().kind != Token::Ident) fail("expected a symbol after '*'");
      return parse_sym_scaled() * c;
    }
    if (peek().kind == Token::Ident) return parse_sym_scaled() * c;
    return LinExpr(c);
  }
  if (peek().kind == Token::Ident) return parse_sym_scaled();
  fail("expected a term");
}

LinExpr RegcheckParser::parse_lin_expr() {
  bool neg = false;
  if (is_punct(peek(), "-")) {
    neg = true;
    ++pos_;
  } else if (is_punct(peek(), "+")) {
    ++pos_;
  }
  LinExpr e = parse_lin_term();
  if (neg) e = e * Rat(-1);
  while (is_punct(peek(), "+") || is_punct(peek(), "-")) {
    const bool minus = peek().text == "-";
    ++pos_;
    const LinExpr t = parse_lin_term();
    e = minus ? e - t : e + t;
  }
  return e;
}

Ineq RegcheckParser::parse_ineq() {
  const LinExpr lhs = parse_lin_expr();
  if (peek().kind != Token::Punct) fail("expected a comparison");
  const std::string op = peek().text;
  if (op != ">" && op != ">=" && op != "<" && op != "<=")
    fail("expected '>', '>=', '<' or '<='");
  ++pos_;
  const LinExpr rhs = parse_lin_expr();
  if (op == ">") return Ineq::gt(lhs - rhs);
  if (op == ">=") return Ineq::ge(lhs - rhs);
  if (op == "<") return Ineq::gt(rhs - lhs);
  return Ineq::ge(rhs - lhs);
}

SobolevOrder RegcheckParser::parse_order() {
  expect("[");
  SobolevOrder s;
  if (peek().kind == Token::Ident && peek().text == "inf") {
    s = SobolevOrder::inf();
    ++pos_;
  } else {
    s = SobolevOrder(parse_lin_expr());
  }
  expect("]");
  return s;
}

bool RegcheckParser::at_class_start() const {
  return peek().kind == Token::Ident &&
         (peek().text == "Psi" || peek().text == "Psi_b" ||
          peek().text == "Hb") &&
         is_punct(peek(1), "[");
}

ClassAtom RegcheckParser::parse_atom() {
  if (!at_class_start()) fail("expected a class (Psi[...], Psi_b[...], Hb[...])");
  const std::string head = peek().text;

  if (head == "Hb") {  // coefficient-left spelling Hb[s]Psi[m=..]
    ++pos_;
    const SobolevOrder s = parse_order();
    if (s.infinite) fail("coefficient classes need a finite order");
    if (!(peek().kind == Token::Ident && peek().text == "Psi" &&
          is_punct(peek(1), "[")))
      fail("expected Psi[m=..] after Hb[..]");
    ++pos_;
    expect("[");
    if (!(peek().kind == Token::Ident && peek().text == "m"))
      fail("coefficient classes take only m=");
    ++pos_;
    expect("=");
    const Rat m = parse_rat();
    expect("]");
    ClassAtom a;
    a.flavor = AtomFlavor::CoefLeft;
    a.m = m;
    a.s = SobolevOrder(s);
    return a;
  }

  const bool bflag = head == "Psi_b";
  ++pos_;
  expect("[");
  Rat m{0};
  bool has_m = false, has_k = false, has_alpha = false;
  int k = 0;
  Rat alpha{0};
  while (true) {
    if (peek().kind != Token::Ident) fail("expected 'm', 'k' or 'alpha'");
    const std::string key = peek().text;
    ++pos_;
    expect("=");
    if (key == "m") {
      m = parse_rat();
      has_m = true;
    } else if (key == "k") {
      if (peek().kind == Token::Ident && peek().text == "inf") {
        k = kAllDerivs;
        ++pos_;
      } else {
        const Rat kv = parse_rat();
        if (kv.denominator() != 1 || kv < Rat(0))
          fail("k must be a nonnegative integer or inf");
        k = static_cast<int>(boost::rational_cast<long long>(kv));
      }
      has_k = true;
    } else if (key == "alpha") {
      alpha = parse_rat();
      has_alpha = true;
    } else {
      fail("unknown class parameter '" + key + "'");
    }
    if (is_punct(peek(), ";")) {
      ++pos_;
      continue;
    }
    break;
  }
  expect("]");
  if (!has_m) fail("a class needs m=");

  const bool has_hb = peek().kind == Token::Ident && peek().text == "Hb" &&
                      is_punct(peek(1), "[");
  if (has_hb) {
    ++pos_;
    const SobolevOrder s = parse_order();
    ClassAtom a;
    a.flavor = AtomFlavor::SymbolClass;
    a.m = m;
    a.k = has_k ? k : 0;
    a.s = s;
    a.b_flag = bflag;
    a.alpha = alpha;
    return a;
  }
  if (bflag) fail("smooth classes have no _b variant");
  if (has_k || has_alpha) fail("smooth classes take only m=");
  ClassAtom a;
  a.flavor = AtomFlavor::Smooth;
  a.m = m;
  return a;
}

OperatorClass RegcheckParser::parse_class() {
  OperatorClass c;
  c.atoms.push_back(parse_atom());
  while (is_punct(peek(), "&")) {
    ++pos_;
    c.atoms.push_back(parse_atom());
  }
  return c;
}

void RegcheckParser::parse_args() {
  expect("(");
  if (is_punct(peek(), ")")) {
    ++pos_;
    return;
  }
  while (true) {
    if (at_class_start()) {
      classes_.push_back(parse_class());
    } else if (peek().kind == Token::Ident && is_punct(peek(1), "=")) {
      const std::string key = peek().text;
      pos_ += 2;
      if (key == "assume") {
        if (has_assume_) fail("duplicate key 'assume'");
        assume_ = {parse_ineq()};
        while (is_punct(peek(), ";")) {
          ++pos_;
          assume_.push_back(parse_ineq());
        }
        has_assume_ = true;
      } else {
        if (values_.count(key)) fail("duplicate key '" + key + "'");
        values_[key] = parse_rat();
      }
    } else {
      fail("expected key=value or a class");
    }
    if (is_punct(peek(), ",")) {
      ++pos_;
      continue;
    }
    break;
  }
  expect(")");
}

Rat RegcheckParser::need_rat(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("regcheck: missing required key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

Rat RegcheckParser::rat_or(const std::string& key, Rat def) {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  consumed_.insert(key);
  return it->second;
}

long long RegcheckParser::need_int(const std::string& key) {
  const Rat r = need_rat(key);
  if (r.denominator() != 1)
    throw ConfigError("regcheck: '" + key + "' must be an integer");
  return boost::rational_cast<long long>(r);
}

std::optional<long long> RegcheckParser::opt_int(const std::string& key) {
  if (!values_.count(key)) return std::nullopt;
  return need_int(key);
}

std::vector<Ineq> RegcheckParser::take_assume() {
  consumed_.insert("assume");
  return assume_;
}

Json RegcheckParser::eval_compose() {
  if (classes_.size() != 2)
    throw ConfigError("regcheck: compose takes two classes (P, Q)");
  const long long k = need_int("k");
  ComposeOptions co;
  if (auto kp = opt_int("kprime")) co.k_prime = static_cast<int>(*kp);
  if (auto n = opt_int("n")) co.n = static_cast<int>(*n);
  co.assumptions = take_assume();

  const Composition c =
      compose(classes_[0], classes_[1], static_cast<int>(k), co);

  Json result;
  result["cases"] = c.matched_cases;
  Json terms = Json::array();
  for (const auto& t : c.terms) terms.push_back(t.str());
  result["terms"] = std::move(terms);
  result["remainder"] = c.remainder.str();
  if (c.split) {
    Json sp;
    sp["order"] = rat_str(c.split->order);
    sp["factor"] = c.split->factor.str();
    result["split"] = std::move(sp);
  }

  Json printed = Json::array();
  std::string cases = "cases:";
  for (std::size_t i = 0; i < c.matched_cases.size(); ++i)
    cases += (i ? ", " : " ") + c.matched_cases[i];
  printed.push_back(cases);
  for (std::size_t j = 0; j < c.terms.size(); ++j)
    printed.push_back("E_" + std::to_string(j) + " in " + c.terms[j].str());
  if (!c.remainder.atoms.empty())
    printed.push_back("R in " + c.remainder.str());
  if (c.split) {
    const std::string q = rat_str(c.split->order);
    printed.push_back("R = R1 Lambda_{" + q + "} + Lambda_{" + q +
                      "} R2, R1, R2 in " + c.split->factor.str());
  }

  Json out;
  out["command"] = "compose";
  out["result"] = std::move(result);
  out["printed"] = std::move(printed);
  out["trace"] = c.trace;
  return out;
}

Json RegcheckParser::eval_map() {
  if (classes_.size() != 1)
    throw ConfigError("regcheck: map takes one class");
  SpaceSpec src;
  src.s = need_rat("s");
  src.r = rat_or("r", Rat(0));
  const long long n = need_int("n");
  const std::vector<Ineq> assume = take_assume();

  const SpaceSpec tgt =
      mapping(classes_[0], src, static_cast<int>(n), assume);

  auto space = [](const SpaceSpec& sp) {
    std::string s = "H_b^{" + rat_str(sp.s);
    if (sp.r != Rat(0)) s += ", " + rat_str(sp.r);
    return s + "}";
  };

  Json result;
  result["s"] = rat_str(tgt.s);
  result["r"] = rat_str(tgt.r);
  Json out;
  out["command"] = "map";
  out["result"] = std::move(result);
  out["printed"] = Json::array({space(src) + " -> " + space(tgt)});
  out["trace"] = Json::array(
      {classes_[0].str() + " : " + space(src) + " -> " + space(tgt)});
  return out;
}

Json RegcheckParser::eval_threshold() {
  const Rat st = need_rat("stilde");
  std::optional<int> n;
  if (auto nn = opt_int("n")) n = static_cast<int>(*nn);

  const RealPrincipalThreshold th = threshold_real_principal(st, n);
  const std::string bound = render_nu(th.bound.str());

  Json trace = Json::array();
  for (const Rat& m0 :
       {th.m0 - Rat(1, 2), th.m0, th.m0 + Rat(1), th.m0 + Rat(2)}) {
    if (m0 < Rat(1)) continue;
    if (auto b = real_principal_bound_for(st, m0, n)) {
      trace.push_back("m0 = " + rat_str(m0) + ": s > " + render_nu(b->str()));
    } else {
      trace.push_back("m0 = " + rat_str(m0) +
                      ": infeasible (needs stilde >= (5 - m0)/2)");
    }
  }

  Json result;
  result["m0"] = rat_str(th.m0);
  result["bound"] = bound;
  result["statement"] = "s > " + bound;
  Json out;
  out["command"] = "threshold_real_principal";
  out["result"] = std::move(result);
  out["printed"] =
      Json::array({"s > " + bound, "optimal m0 = " + rat_str(th.m0)});
  out["trace"] = std::move(trace);
  return out;
}

Json RegcheckParser::eval_radial() {
  const Rat st = need_rat("stilde");
  const Rat m = need_rat("m");
  const Rat r = rat_or("r", Rat(0));
  const Rat btil = rat_or("betatilde", Rat(1));
  Rat bhinf, bhsup;
  if (values_.count("betahat")) {
    bhinf = bhsup = need_rat("betahat");
  } else {
    bhinf = need_rat("betahat_inf");
    bhsup = need_rat("betahat_sup");
  }

  const RadialBehavior rb = threshold_radial(st, m, r, bhinf, bhsup, btil);
  const std::string verdict = rb == RadialBehavior::IntoBoundary
                                  ? "IntoBoundary"
                              : rb == RadialBehavior::FromBoundary
                                  ? "FromBoundary"
                                  : "Neither";

  const Rat base = st + (m - Rat(1)) / Rat(2);
  const Rat q_into = base - Rat(1) + bhinf - r * btil;
  const Rat q_from = base + bhsup - r * btil;
  Json trace = Json::array();
  trace.push_back("into-boundary margin stilde + (m-1)/2 - 1 + inf(betahat -"
                  " r betatilde) = " +
                  rat_str(q_into) + " (needs > 0)");
  trace.push_back("from-boundary margin stilde + (m-1)/2 + sup(betahat -"
                  " r betatilde) = " +
                  rat_str(q_from) + " (needs < 0)");

  Json result;
  result["behavior"] = verdict;
  result["into_margin"] = rat_str(q_into);
  result["from_margin"] = rat_str(q_from);
  Json out;
  out["command"] = "threshold_radial";
  out["result"] = std::move(result);
  out["printed"] = Json::array({verdict});
  out["trace"] = std::move(trace);
  return out;
}

Json RegcheckParser::eval_weight_shift() {
  const Rat m = need_rat("m");
  const Rat m0 = need_rat("m0");
  const Rat r = rat_or("r", Rat(0));
  const Rat beta0 = rat_or("beta0", Rat(1));
  const Rat btil = rat_or("betatilde", Rat(1));
  const Rat bhat = rat_or("betahat", Rat(0));

  const Rat shift = weight_shift_subprincipal(m, m0, r, beta0, btil, bhat);

  Json result;
  result["shift"] = rat_str(shift);
  Json out;
  out["command"] = "weight_shift";
  out["result"] = std::move(result);
  out["printed"] = Json::array({"shift = " + rat_str(shift)});
  out["trace"] = Json::array(
      {"betahat + (m - m0)/2 - r betatilde = " + rat_str(shift),
       "invariant: stilde + (m0-1)/2 + shift = stilde + (m-1)/2 + betahat -"
       " r betatilde"});
  return out;
}

Json RegcheckParser::eval(const std::string& query) {
  if (peek().kind != Token::Ident) fail("expected a query name");
  const std::string name = peek().text;
  ++pos_;
  parse_args();
  if (peek().kind != Token::End) fail("trailing input");

  Json out;
  if (name == "compose") {
    out = eval_compose();
  } else if (name == "map" || name == "mapping") {
    out = eval_map();
  } else if (name == "threshold" || name == "threshold_real_principal") {
    out = eval_threshold();
  } else if (name == "threshold_radial") {
    out = eval_radial();
  } else if (name == "weight_shift") {
    out = eval_weight_shift();
  } else {
    throw ConfigError(
        "regcheck: unknown query '" + name +
        "' (expected compose, map, threshold_real_principal, "
        "threshold_radial or weight_shift)");
  }

  for (const auto& [key, value] : values_) {
    (void)value;
    if (!consumed_.count(key))
      throw ConfigError("regcheck: key '" + key + "' is not used by '" +
                        name + "'");
  }
  if (has_assume_ && !consumed_.count("assume"))
    throw ConfigError("regcheck: 'assume' is not used by '" + name + "'");

  Json wrapped;
  wrapped["query"] = query;
  for (auto& [k, v] : out.items()) wrapped[k] = std::move(v);
  return wrapped;
}

}  // namespace

Json regcheck_eval(const std::string& expr) {
  RegcheckParser parser(expr);
  return parser.eval(expr);
}

}  // namespace dsw
