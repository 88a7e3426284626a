// Artifact plumbing for the command-line driver: deterministic serialization
// of results to CSV / JSON / gnuplot tables, grid-field binary I/O with JSON
// sidecars, run manifests, config-schema validation, and the expression
// evaluator behind the `regcheck` subcommand.
//
// Every float that reaches an artifact goes through one fixed-precision
// formatter, so identical configs reproduce artifacts byte for byte.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsw/bnorm.hpp"
#include "dsw/fitting.hpp"
#include "dsw/hamilton.hpp"
#include "dsw/picard.hpp"
#include "dsw/resonance.hpp"
#include "dsw/wave.hpp"

namespace dsw {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Deterministic text output.

// Fixed-precision scientific rendering ("%.12e") used in every CSV cell.
std::string format_sci(double v);

// Round-trips v through format_sci so JSON artifacts carry the same fixed
// precision as the CSV ones.
double fixed_precision(double v);

// One RFC-4180 record: fields quoted when they contain separators or quotes,
// terminated with CRLF.
std::string csv_row(const std::vector<std::string>& fields);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Whitespace-separated table with a leading '#' header line (gnuplot-ready).
void write_dat(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

// 64-bit FNV-1a, lowercase hex; hashes canonical config dumps for manifests.
std::string fnv1a_hex(const std::string& bytes);

// ---------------------------------------------------------------------------
// Grid fields on disk: <stem>.bin holds little-endian doubles (header counts,
// then times, then values); <stem>.json records the grid, the payload hash,
// and the problem description that produced the field.

void write_field(const std::string& stem, const GridField& f,
                 const Json& problem);
GridField read_field(const std::string& stem);

// Same layout for half-space fields (complex values interleaved re, im);
// the sidecar records the grid spec (n, T, Nt, L, Ny).
void write_half_field(const std::string& stem, const HalfSpaceField& f,
                      const Json& problem);
HalfSpaceField read_half_field(const std::string& stem);

// ---------------------------------------------------------------------------
// Result serialization (stable key order everywhere).

Json lattice_json(const ResonanceLattice& lat);
Json entries_json(const std::vector<LatticeEntry>& entries);
Json fit_json(const DecayFit& fit);
Json iteration_json(const IterationReport& rep);
Json scan_json(const ScanReport& rep);

// ---------------------------------------------------------------------------
// Config resolution.

// One schema entry; type is one of "int", "number", "bool", "string",
// "array", "object".
struct KeySpec {
  std::string key;
  std::string type;
  Json fallback;  // null = required
};

// Validates cfg against the schema: unknown keys are rejected, missing keys
// filled from fallbacks (ConfigError when required), basic types enforced.
// Returns the resolved config with keys in schema order.
Json resolve_config(const Json& cfg, const std::vector<KeySpec>& schema);

// Applies "dotted.path=value" overrides (from --set flags or environment
// variables); values parse as JSON when possible, else as strings.
void apply_override(Json& cfg, const std::string& path, const std::string& value);

// Environment overrides: for each schema key KEY, DSWAVE_<KEY-upper> (dots
// as double underscores) replaces the config value when set.
void apply_env_overrides(Json& cfg, const std::vector<KeySpec>& schema);

// Run manifest: resolved config + hash + versions + wall time + artifact
// list.  A manifest is itself accepted as a --config file (the embedded
// config is extracted), which makes every artifact directory re-runnable.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const Json& config, double wall_ms,
                    const std::vector<std::string>& artifacts);

// If j looks like a manifest (has "command" and "config"), returns the
// embedded config after checking the command matches; otherwise returns j.
Json unwrap_manifest(const Json& j, const std::string& command);

// ---------------------------------------------------------------------------
// regcheck expression language.
//
//   classes:  Psi[m=2;k=3]Hb[s]     symbol class (k=inf for all derivatives)
//             Psi_b[m=2;k=0;alpha=1]Hb[s']   totally characteristic + weight
//             Hb[5]Psi[m=2]          coefficient-left class
//             Psi[m=2]               smooth class
//             orders: rationals (3, 7/2, -1), symbols (s, s', stilde), inf
//   queries:  compose(P, Q, k=3 [, kprime=0] [, n=4] [, assume=s'-s-3>=0; ...])
//             map(A, s=3 [, r=0], n=4 [, assume=...])
//             threshold_real_principal(stilde=2 [, n=4])   (alias: threshold)
//             threshold_radial(stilde=.., m=.., r=.. [, betahat=0]
//                              [, betahat_inf=..] [, betahat_sup=..]
//                              [, betatilde=1])
//             weight_shift(m=.., m0=.. [, r=0] [, beta0=4] [, betatilde=1]
//                          [, betahat=0])
//   linear expressions in assume/orders accept n/2 as a spelling of nu.
//
// Returns {"query", "command", "result", "trace"}; "printed" carries the
// human-readable lines for stdout (threshold bounds render nu as n/2).
Json regcheck_eval(const std::string& expr);

}  // namespace dsw
