#include "gtsynth/cli.hpp"

#include "gtsynth/errors.hpp"
#include "gtsynth/info_rates.hpp"
#include "gtsynth/io.hpp"
#include "gtsynth/layering.hpp"
#include "gtsynth/sign_model.hpp"
#include "gtsynth/synthesis.hpp"
#include "gtsynth/tree_model.hpp"
#include "gtsynth/validation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

namespace gtsynth::cli {

namespace {

using io::Json;

struct Options {
  std::string tree;
  std::string out;
  std::string run_dir;
  std::string from_manifest;
  std::uint64_t n = 64;
  std::uint64_t blocks = 2000;
  std::uint64_t samples = 20000;
  std::uint64_t seed = 0;
  std::uint64_t permutations = 199;
  double margin = 1.1;
  double grid_step = 0.05;
  int layer = -1;
  int bins = 64;
  bool bits = false;
};

// Files are collected first and written together, manifest last.
struct Output {
  std::vector<std::pair<std::string, std::string>> files;
  std::string manifest_path;
  Json result = Json::object();
};

struct Failure {
  int code;
  std::string message;
};

std::string num(double v) { return io::format_double(v); }

GaussianTree load_valid_tree(const std::string& path) {
  GaussianTree t = load_tree(path);
  const auto v = validate_tree(t);
  if (!v.empty()) {
    std::string msg = "invalid tree:";
    for (const auto& s : v) msg += " " + s + ";";
    throw TreeError(msg);
  }
  return t;
}

LayeredTree layered_for(const GaussianTree& tree) {
  LayerAssignment a = assign_layers(tree);
  if (a.layered) return *a.layered;
  return restructure(tree);
}

std::string manifest_for_file(const std::string& out) { return out + ".manifest.json"; }
std::string manifest_for_dir(const std::string& dir, const std::string& cmd) {
  return (std::filesystem::path(dir) / (cmd + ".manifest.json")).string();
}
std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

Json config_json(const std::string& cmd, const Options& o) {
  Json c = Json::object();
  if (cmd == "rates" || cmd == "optimize-pi" || cmd == "synthesize") {
    c["samples"] = o.samples;
    c["seed"] = o.seed;
  }
  if (cmd == "rates" || cmd == "optimize-pi") {
    c["layer"] = o.layer;
    c["bits"] = o.bits;
  }
  if (cmd == "optimize-pi") c["grid_step"] = o.grid_step;
  if (cmd == "synthesize") {
    c["N"] = o.n;
    c["blocks"] = o.blocks;
    c["rate_margin"] = o.margin;
  }
  if (cmd == "report") {
    c["bins"] = o.bins;
    c["seed"] = o.seed;
    c["permutations"] = o.permutations;
    c["run"] = o.run_dir;
  }
  return c;
}

// Effective argument list that reproduces the command.
std::vector<std::string> canonical_args(const std::string& cmd, const Options& o) {
  std::vector<std::string> a;
  if (cmd == "signs") a = {"signs", "enumerate"};
  else a = {cmd};
  if (!o.tree.empty()) a.insert(a.end(), {"-t", o.tree});
  if (cmd == "rates" || cmd == "optimize-pi" || cmd == "synthesize")
    a.insert(a.end(), {"--samples", std::to_string(o.samples), "--seed", std::to_string(o.seed)});
  if (cmd == "rates" || cmd == "optimize-pi") {
    a.insert(a.end(), {"--layer", std::to_string(o.layer)});
    if (o.bits) a.push_back("--bits");
  }
  if (cmd == "optimize-pi") a.insert(a.end(), {"--grid-step", num(o.grid_step)});
  if (cmd == "synthesize")
    a.insert(a.end(), {"-N", std::to_string(o.n), "--blocks", std::to_string(o.blocks), "--rate-margin", num(o.margin)});
  if (cmd == "report")
    a.insert(a.end(), {"--run", o.run_dir, "--bins", std::to_string(o.bins), "--seed", std::to_string(o.seed),
                       "--permutations", std::to_string(o.permutations)});
  if (!o.out.empty()) a.insert(a.end(), {"-o", o.out});
  return a;
}

void emit(const std::string& cmd, const Options& o, Output& res, std::ostream& out) {
  if (res.manifest_path.empty()) return;
  Json m;
  m["command"] = cmd;
  m["tool_version"] = kToolVersion;
  m["tree"] = o.tree;
  m["config"] = config_json(cmd, o);
  m["argv"] = canonical_args(cmd, o);
  Json outs = Json::array();
  for (const auto& f : res.files) outs.push_back(f.first);
  m["outputs"] = outs;
  if (!res.result.empty()) m["result"] = res.result;
  for (const auto& [path, content] : res.files) io::write_file_atomic(path, content);
  io::write_file_atomic(res.manifest_path, m.dump(2) + "\n");
  out << "wrote " << res.files.size() << " file(s); manifest " << res.manifest_path << "\n";
}

// Either to the -o file (with a manifest) or to stdout.
void text_output(const std::string& cmd, const Options& o, const std::string& text, std::ostream& out) {
  if (o.out.empty()) {
    out << text;
    return;
  }
  Output res;
  res.files.emplace_back(o.out, text);
  res.manifest_path = manifest_for_file(o.out);
  emit(cmd, o, res, out);
}

int cmd_validate(const Options& o, std::ostream& out) {
  const GaussianTree t = load_tree(o.tree);
  const auto v = validate_tree(t);
  Json j;
  j["valid"] = v.empty();
  j["violations"] = v;
  text_output("validate", o, j.dump(2) + "\n", out);
  return v.empty() ? 0 : 1;
}

Json layering_json(const GaussianTree& t, const LayeredTree& lt, const LayerAssignment& a) {
  Json j;
  j["top_layer"] = lt.top_layer();
  j["restructured"] = !a.layered.has_value();
  Json conflicts = Json::array();
  for (const auto& c : a.conflicts) conflicts.push_back({{"a", c.a}, {"b", c.b}, {"layer", c.layer}});
  j["conflicts"] = conflicts;
  Json layers = Json::array();
  for (const auto& layer : lt.layers) {
    Json ids = Json::array();
    for (int v : layer) ids.push_back(t.node(v).id);
    layers.push_back(ids);
  }
  j["layers"] = layers;
  Json parents = Json::object();
  for (std::size_t v = 0; v < t.node_count(); ++v)
    if (lt.parent_of[v] >= 0) parents[t.node(static_cast<int>(v)).id] = t.node(lt.parent_of[v]).id;
  j["parent_of"] = parents;
  Json top = Json::array();
  for (int e : lt.top_edges) top.push_back({t.edges()[static_cast<std::size_t>(e)].a, t.edges()[static_cast<std::size_t>(e)].b});
  j["top_edges"] = top;
  Json channels = Json::array();
  for (int l = 0; l < lt.top_layer(); ++l) {
    const LayerChannel ch = build_layer_channel(lt, t, l);
    Json rows = Json::array();
    for (std::size_t r = 0; r < ch.rows(); ++r)
      rows.push_back({{"node", t.node(ch.outputs[r]).id},
                      {"parent", t.node(ch.inputs[static_cast<std::size_t>(ch.parent_pos[r])]).id},
                      {"coef", ch.coef[r]},
                      {"noise_var", ch.noise_var[r]}});
    channels.push_back({{"layer", l}, {"rows", rows}});
  }
  j["channels"] = channels;
  return j;
}

int cmd_layerize(const Options& o, std::ostream& out) {
  const GaussianTree t = load_valid_tree(o.tree);
  const LayerAssignment a = assign_layers(t);
  const LayeredTree lt = a.layered ? *a.layered : restructure(t);
  text_output("layerize", o, layering_json(t, lt, a).dump(2) + "\n", out);
  return 0;
}

int cmd_signs(const Options& o, std::ostream& out) {
  const GaussianTree t = load_valid_tree(o.tree);
  const auto classes = enumerate_signs(t);
  const auto dev = sign_class_deviations(t);
  std::string s;
  for (std::size_t i = 0; i < classes.size(); ++i) s += classes[i].bitstring() + "," + num(dev[i]) + "\n";
  text_output("signs", o, s, out);
  return 0;
}

std::vector<std::string> latent_ids(const GaussianTree& t) {
  std::vector<std::string> ids;
  for (int v : t.latents()) ids.push_back(t.node(v).id);
  return ids;
}

// Spreads the layer's pi over one column per latent (NaN = not in layer).
std::vector<double> full_pi(const GaussianTree& t, const LayeredTree& lt, int upper, const std::vector<double>& pi) {
  std::vector<double> out(t.latent_count(), NAN);
  const auto lat = lt.latents_at(t, upper);
  for (std::size_t j = 0; j < lat.size(); ++j) out[static_cast<std::size_t>(t.sign_slot(lat[j]))] = pi[j];
  return out;
}

std::vector<int> chosen_layers(const Options& o, const LayeredTree& lt) {
  if (o.layer >= lt.top_layer())
    throw DomainError("layer " + std::to_string(o.layer) + " has no channel (top layer " +
                      std::to_string(lt.top_layer()) + ")");
  if (o.layer >= 0) return {o.layer};
  std::vector<int> ls;
  for (int l = 0; l < lt.top_layer(); ++l) ls.push_back(l);
  return ls;
}

int cmd_rates(const Options& o, std::ostream& out) {
  const GaussianTree t = load_valid_tree(o.tree);
  const LayeredTree lt = layered_for(t);
  std::vector<RateBounds> rows;
  for (int l : chosen_layers(o, lt)) {
    RateBounds rb = layer_rate_bounds(lt, t, l, {}, o.samples, o.seed);
    rb.pi = full_pi(t, lt, l + 1, rb.pi);
    rows.push_back(rb);
  }
  text_output("rates", o, io::rates_csv(rows, latent_ids(t), o.bits), out);
  return 0;
}

int cmd_optimize(const Options& o, std::ostream& out) {
  const GaussianTree t = load_valid_tree(o.tree);
  const LayeredTree lt = layered_for(t);
  const int l = o.layer < 0 ? 0 : o.layer;
  chosen_layers(o, lt);
  const PiOptimum opt = optimize_pi(lt, t, l, o.grid_step, o.samples, o.seed);
  const double sum = sum_rate_bound(lt, t, l, SignAssignment::all_positive(t.latent_count()));
  std::vector<RateBounds> rows;
  for (const auto& p : opt.curve) rows.push_back({l, full_pi(t, lt, l + 1, p.pi), sum, p.estimate, p.ci});
  const std::string csv = io::rates_csv(rows, latent_ids(t), o.bits);
  const double scale = o.bits ? 1.0 / std::log(2.0) : 1.0;
  std::string star = "pi_star";
  for (double p : opt.pi_star) star += "," + num(p);
  star += "\nobjective," + num(opt.objective * scale) + "," + num(opt.ci * scale) + "\n";
  if (o.out.empty()) {
    out << csv << star;
    return 0;
  }
  Output res;
  res.files.emplace_back(o.out, csv);
  res.manifest_path = manifest_for_file(o.out);
  res.result = {{"pi_star", opt.pi_star}, {"objective", opt.objective * scale}, {"ci", opt.ci * scale}};
  emit("optimize-pi", o, res, out);
  out << star;
  return 0;
}

int cmd_synthesize(const Options& o, std::ostream& out) {
  const GaussianTree t = load_valid_tree(o.tree);
  const LayeredTree lt = layered_for(t);
  SynthesisConfig cfg;
  cfg.N = o.n;
  cfg.blocks = o.blocks;
  cfg.rate_margin = o.margin;
  cfg.seed = o.seed;
  cfg.rate_samples = o.samples;
  const Synthesizer syn(t, lt, cfg);
  const SynthesisRun run = synthesize(syn);

  std::vector<RateBounds> rows;
  for (int l = 0; l < lt.top_layer(); ++l) {
    RateBounds rb = run.rates[static_cast<std::size_t>(l)];
    rb.pi = full_pi(t, lt, l + 1, rb.pi);
    rows.push_back(rb);
  }
  Output res;
  res.files.emplace_back(in_dir(o.out, "blocks.csv"), io::blocks_csv(run));
  res.files.emplace_back(in_dir(o.out, "lineage.json"), io::lineage_json(run).dump() + "\n");
  res.files.emplace_back(in_dir(o.out, "rates.csv"), io::rates_csv(rows, latent_ids(t), false));
  res.manifest_path = manifest_for_dir(o.out, "synthesize");
  res.result = {{"codebooks", io::codebooks_json(run.codebooks)}};
  emit("synthesize", o, res, out);
  return 0;
}

int cmd_report(Options o, std::ostream& out) {
  const std::string mpath = manifest_for_dir(o.run_dir, "synthesize");
  Json manifest;
  try {
    manifest = Json::parse(io::read_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw Error("cannot parse " + mpath + ": " + e.what());
  }
  if (o.tree.empty()) o.tree = manifest.value("tree", std::string());
  const GaussianTree t = load_valid_tree(o.tree);
  const Json lineage = Json::parse(io::read_file(in_dir(o.run_dir, "lineage.json")));
  const SynthesisRun run = io::read_run(io::read_file(in_dir(o.run_dir, "blocks.csv")), lineage,
                                        manifest.at("result").at("codebooks"));
  const CovarianceMatrix target = observed_covariance(t, SignAssignment::all_positive(t.latent_count()));
  const FidelityReport fid = fidelity_report(run, target, o.bins);

  Json rep;
  rep["run"] = o.run_dir;
  rep["fidelity"] = io::fidelity_json(fid);
  rep["note"] = "block-level TV is replaced by covariance error, marginal TV and a Gaussian Pinsker bound";
  IndependenceOptions io_opt;
  io_opt.seed = o.seed;
  io_opt.permutations = o.permutations;
  std::string sign_pass = "";
  try {
    const IndependenceReport ind = independence_tests(run, io_opt);
    rep["independence"] = io::independence_json(ind);
    sign_pass = ind.sign_groups_pass ? "true" : "false";
  } catch (const InsufficientData& e) {
    rep["independence"] = {{"sign_groups_skipped", e.what()},
                           {"cross_block", io::verdict_json(cross_block_test(run, o.permutations, o.seed, 0.01))}};
  }
  const Json& cb = rep["independence"]["cross_block"];

  std::string csv =
      "pooled_slots,bins,max_cov_error,frobenius_error,max_marginal_tv,pinsker_tv_bound,sign_groups_pass,"
      "cross_block_p,cross_block_reject\n";
  csv += std::to_string(fid.pooled_slots) + "," + std::to_string(fid.bins) + "," + num(fid.max_cov_error) + "," +
         num(fid.frobenius_error) + "," + num(fid.max_marginal_tv) + "," + num(fid.pinsker_tv_bound) + "," +
         sign_pass + "," + num(cb["p_value"].get<double>()) + "," + (cb["reject"].get<bool>() ? "true" : "false") +
         "\n";

  if (o.out.empty()) o.out = o.run_dir;
  Output res;
  res.files.emplace_back(in_dir(o.out, "report.json"), rep.dump(2) + "\n");
  res.files.emplace_back(in_dir(o.out, "report.csv"), csv);
  res.manifest_path = manifest_for_dir(o.out, "report");
  emit("report", o, res, out);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent Gaussian tree synthesis toolkit", "gtsynth"};
  app.set_version_flag("--version", kToolVersion);
  Options o;
  app.add_option("--from-manifest", o.from_manifest, "Re-run the command recorded in a manifest")
      ->check(CLI::ExistingFile);

  auto tree_opt = [&o](CLI::App* c, bool required) {
    auto* opt = c->add_option("-t,--tree", o.tree, "Tree-spec JSON file")->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  auto out_opt = [&o](CLI::App* c, const std::string& what) { c->add_option("-o,--out", o.out, what); };
  auto mc_opts = [&o](CLI::App* c) {
    c->add_option("--samples", o.samples, "Monte-Carlo samples per estimate")
        ->check(CLI::Range(std::uint64_t{kMinRateSamples}, std::uint64_t{1} << 40));
    c->add_option("--seed", o.seed, "Seed for all randomness");
  };

  auto* validate = app.add_subcommand("validate", "Check tree invariants");
  tree_opt(validate, true);
  out_opt(validate, "Write the violation list here");

  auto* layerize = app.add_subcommand("layerize", "Assign layers, restructuring if needed");
  tree_opt(layerize, true);
  out_opt(layerize, "Write the layering JSON here");

  auto* signs = app.add_subcommand("signs", "Sign-class utilities");
  auto* enumerate = signs->add_subcommand("enumerate", "List sign classes with their covariance deviation");
  signs->require_subcommand(1);
  tree_opt(enumerate, true);
  out_opt(enumerate, "Write the class list here");

  auto* rates = app.add_subcommand("rates", "Per-layer rate bounds");
  tree_opt(rates, true);
  mc_opts(rates);
  rates->add_option("--layer", o.layer, "Channel layer (default: all)")->check(CLI::Range(-1, 1 << 20));
  rates->add_flag("--bits", o.bits, "Report in bits instead of nats");
  out_opt(rates, "Output CSV");

  auto* optimize = app.add_subcommand("optimize-pi", "Grid search over sign parameters");
  tree_opt(optimize, true);
  mc_opts(optimize);
  optimize->add_option("--layer", o.layer, "Channel layer (default 0)")->check(CLI::Range(-1, 1 << 20));
  optimize->add_option("--grid-step", o.grid_step, "Grid step in (0, 0.25]")
      ->check(CLI::Range(1e-6, 0.25));
  optimize->add_flag("--bits", o.bits, "Report in bits instead of nats");
  out_opt(optimize, "Output CSV");

  auto* synth = app.add_subcommand("synthesize", "Run the layered codebook synthesis");
  tree_opt(synth, true);
  mc_opts(synth);
  synth->add_option("-N", o.n, "Block length")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 32));
  synth->add_option("--blocks", o.blocks, "Number of blocks")
      ->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 32));
  synth->add_option("--rate-margin", o.margin, "Multiplier >= 1 on the rate bounds")->check(CLI::Range(1.0, 1e6));
  synth->add_option("-o,--out", o.out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Fidelity report for a synthesized run");
  tree_opt(report, false);
  report->add_option("--run", o.run_dir, "Directory written by synthesize")->required()->check(CLI::ExistingDirectory);
  report->add_option("--bins", o.bins, "Histogram bins (>= 8)")->check(CLI::Range(8, 1 << 20));
  report->add_option("--seed", o.seed, "Seed for permutation tests");
  report->add_option("--permutations", o.permutations, "Permutations for the cross-block test")
      ->check(CLI::Range(std::uint64_t{19}, std::uint64_t{1} << 24));
  out_opt(report, "Output directory (default: the run directory)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  if (!o.from_manifest.empty()) {
    if (args.size() != 2) {
      err << "error: --from-manifest takes no other arguments\n";
      return 2;
    }
    std::vector<std::string> again;
    try {
      const Json m = Json::parse(io::read_file(o.from_manifest));
      again = m.at("argv").get<std::vector<std::string>>();
    } catch (const std::exception& e) {
      err << "error: unusable manifest: " << e.what() << "\n";
      return 2;
    }
    return run(again, out, err);
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out);
    if (layerize->parsed()) return cmd_layerize(o, out);
    if (enumerate->parsed()) return cmd_signs(o, out);
    if (rates->parsed()) return cmd_rates(o, out);
    if (optimize->parsed()) return cmd_optimize(o, out);
    if (synth->parsed()) return cmd_synthesize(o, out);
    if (report->parsed()) return cmd_report(o, out);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gtsynth::cli
