#pragma once

// Text artifacts: CSV tables with %.17g doubles, JSON sidecars, and
// all-or-nothing file writes.

#include "gtsynth/info_rates.hpp"
#include "gtsynth/synthesis.hpp"
#include "gtsynth/validation.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace gtsynth::io {

using Json = nlohmann::ordered_json;

/// %.17g: round-trips every finite double.
std::string format_double(double v);

/// Writes through a temporary sibling and renames it into place; creates
/// missing parent directories.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Header `block,t,<observed ids>`.
std::string blocks_csv(const SynthesisRun& run);
/// {"blocks": B, "layers": L, "lineage": {"<block>": {"<layer>": [y, b]}}}
Json lineage_json(const SynthesisRun& run);
Json codebooks_json(const std::vector<CodebookShape>& books);

/// Rebuilds a run from blocks.csv, lineage.json and the codebook list.
/// Throws Error on malformed input.
SynthesisRun read_run(const std::string& blocks_csv_text, const Json& lineage, const Json& codebooks);

/// One row per entry: layer, pi_<id>..., sum_rate_lb, y_rate_lb, ci. In bits
/// when `bits` is set. `pi_ids` name the pi columns (padded with empty
/// cells when a row has fewer entries).
std::string rates_csv(const std::vector<RateBounds>& rows, const std::vector<std::string>& pi_ids, bool bits);

Json fidelity_json(const FidelityReport& r);
Json verdict_json(const TestVerdict& v);
Json independence_json(const IndependenceReport& r);

}  // namespace gtsynth::io
