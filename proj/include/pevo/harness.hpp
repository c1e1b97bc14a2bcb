#ifndef PEVO_HARNESS_HPP
#define PEVO_HARNESS_HPP

// Batch harness: JSON experiment configs in, reproducible artifacts out.
//
// A config file fully determines an experiment; its canonical form (effective
// values with every default materialised, keys sorted, output location
// excluded) is hashed with git's blob rule, and all artifacts land in
// <out>/<hash prefix>/.  Identical configs therefore reuse one directory and
// reproduce byte-identical record.json / data.csv / *.svg — wall-clock time
// and other nondeterministic chatter never enter the artifacts.
//
// Experiments:
//   threshold    exact classification of the operator (no evolution)
//   simulate     one packet run at a single frequency, trajectory recorded
//   growth       rate sweep + power-law fit against the operator threshold
//   bounded      normalised-rate sweep in the tame regime
//   datum-decay  initial-energy decay law plus its quadrature lower bound
//   oracle-check random separable quantisations against the dense matrix

#include "pevo/energy.hpp"
#include "pevo/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pevo {

enum class Experiment { threshold, simulate, growth, bounded, datum_decay, oracle_check };

// The CLI/config spelling: "datum-decay", "oracle-check", etc.
std::string experiment_name(Experiment e);

// Effective settings of one experiment.  parse_config is the only intended
// producer; it fills defaults, so every field below is meaningful after it.
struct ExperimentConfig {
    Experiment experiment = Experiment::threshold;
    ModelOperator op;          // experiments acting on an operator
    bool has_operator = false;
    std::vector<double> nus;   // sweep frequencies (one entry for simulate)
    WavePacketRun tmpl;        // packet/energy parameters (p synced with op)
    int record_count = 9;      // recorded states per run, >= 2
    double slope_tolerance = 0.15; // |fitted slope - target| acceptance band
    double ratio_limit = 5.0;      // bounded: max/min bound on Q(nu)
    int oracle_n = 128;        // oracle-check grid size (power of two <= 1024)
    int oracle_trials = 100;
    std::uint64_t seed = 1;    // rng seed (oracle-check draws)
    std::string out_dir;       // config-level output root ("" = unset)
};

// Parses and validates a config document.  Unknown fields, missing required
// fields, type mismatches, and physics preconditions (frequency floors, grid
// sizing, the bounded-regime inequality xi < 1/theta, ...) all throw
// ConfigError naming the constraint.  When expected_experiment is nonempty
// the document's "experiment" must spell exactly that.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& expected_experiment = "");

// Canonical form: every effective value including defaults, except the
// output location.  Key order is alphabetical (nlohmann object semantics),
// so dump() is the canonical byte sequence to hash.
nlohmann::json canonical_config(const ExperimentConfig& cfg);

// Hex SHA-1 of the git blob header "blob <size>\0" followed by content —
// equals `git hash-object --stdin`.
std::string git_blob_sha1(const std::string& content);

struct BoundedStats {
    double q_max = 0.0;
    double q_min = 0.0;
    double ratio_limit = 0.0;
    bool top_increasing = false;
};

struct OracleStats {
    int n = 0;
    int trials = 0;
    double max_rel_error = 0.0;
};

// Everything an experiment produced, in deterministic, serialisable form.
// Optional blocks are flagged; the JSON layout omits absent blocks.  Two
// records compare equal iff their serialised forms are byte-identical (the
// in-memory term tables are diagnostics and do not participate).
struct RunRecord {
    std::string schema = "pevo-record/1";
    std::string experiment;
    nlohmann::json config = nlohmann::json::object(); // canonical echo
    std::string config_hash;                          // full 40-hex blob sha1

    bool has_threshold = false;
    ThresholdReport threshold;

    std::vector<NuRun> runs;            // evolved sweeps (times + log E kept)
    std::vector<DatumDecayRun> datum_runs;

    bool has_fit = false;
    PowerLawFit fit;
    double fit_target = 0.0; // slope the verdict compares against

    bool has_lambda_flag = false;
    bool lambda_nondecreasing = false;

    bool has_bounded = false;
    BoundedStats bounded;

    bool has_datum_bound = false;
    bool datum_bound_ok = false;

    bool has_oracle = false;
    OracleStats oracle;

    std::string verdict; // "PASS" or "FAIL"
};

bool operator==(const RunRecord& a, const RunRecord& b);
bool operator!=(const RunRecord& a, const RunRecord& b);

// record.json serialisation (compact, sorted keys, trailing newline) and its
// exact inverse.  parse_record throws ContractError on malformed documents.
std::string record_json(const RunRecord& rec);
RunRecord parse_record(const std::string& text);

// data.csv: header `nu,t,log_E,log_E0,lambda_rate`, LF endings, 12
// significant digits, '-0' normalised away.  Evolved runs contribute one row
// per recorded time (nu-major); datum runs one t = 0 row each.
std::string render_csv(const RunRecord& rec);

// rates.svg: the sweep's power law — log Lambda (or log(-log E0) for datum
// decay) against log nu, with the fitted line and slope annotation when a
// fit exists.  energy.svg: one polyline of (t, log E) per frequency.  Both
// are self-contained 640x400 documents.
std::string render_rates_svg(const RunRecord& rec);
std::string render_energy_svg(const RunRecord& rec);

// Progress sink for long sweeps: one line per completed frequency.
using RunLogger = std::function<void(const std::string&)>;

// Executes the experiment.  When partial_dir is nonempty, each completed
// frequency is persisted there as nu_<value>.json before the sweep moves on,
// so an interrupted run leaves its finished measurements behind.  Numeric
// failures propagate as NumericError/ContractError.
RunRecord run_experiment(const ExperimentConfig& cfg, const std::string& partial_dir = "",
                         const RunLogger& log = {});

// Writes record.json, data.csv, rates.svg, energy.svg under
// <out_root>/<first 12 hash chars>/ (created as needed); each file goes
// through a temp name + rename, so readers never observe partial content.
// Returns the artifact directory.
std::string emit_outputs(const RunRecord& rec, const std::string& out_root);

// Output root priority: environment (PEVO_OUT) over CLI flag over config
// value over the literal "out".  env may be null or empty (= unset).
std::string resolve_out_dir(const char* env_value, const std::string& cli_value,
                            const std::string& config_value);

} // namespace pevo

#endif
