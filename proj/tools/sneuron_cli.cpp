#include "sneuron/atlas.hpp"
#include "sneuron/corpus.hpp"
#include "sneuron/decoding.hpp"
#include "sneuron/error.hpp"
#include "sneuron/factory.hpp"
#include "sneuron/io_util.hpp"
#include "sneuron/kernels.hpp"
#include "sneuron/metrics.hpp"
#include "sneuron/model_io.hpp"
#include "sneuron/parallel.hpp"
#include "sneuron/steering.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace sneuron;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Invariant: return kExitInternal;
    default: return kExitData;
    }
}

void note(const std::string& msg) { std::cerr << msg << "\n"; }

Vocabulary load_vocab_for(const fs::path& path, const ModelWeights& w) {
    Vocabulary vocab = Vocabulary::load(path);
    if (vocab.size() != w.config.vocab_size) {
        fail(ErrorKind::Input, "vocabulary " + path.string() + " has " + std::to_string(vocab.size()) +
                                   " entries but the model's vocab_size is " + std::to_string(w.config.vocab_size));
    }
    return vocab;
}

// ---- model ----

struct ModelSynthArgs {
    std::string spec, out, registry;
};

void cmd_model_synth(const ModelSynthArgs& a) {
    const PlantSpec spec = plant_spec_from_json(read_file(a.spec));
    const PlantedModel pm = synth_planted(spec);
    const std::string registry = a.registry.empty() ? a.out + ".registry.json" : a.registry;
    save_model(pm.weights, a.out);
    write_file_atomic(registry, registry_to_json(pm.registry));
    note("wrote " + a.out + " (" + std::to_string(spec.plants.size()) + " plants) and " + registry);
}

struct ModelRandomArgs {
    std::string config, out;
    std::uint64_t seed = 0;
    double scale = 1.0;
};

void cmd_model_random(const ModelRandomArgs& a) {
    const ModelConfig cfg = config_from_json(read_file(a.config));
    save_model(synth_random(cfg, a.seed, a.scale), a.out);
    note("wrote " + a.out);
}

struct ModelSpecArgs {
    std::string out;
    std::uint64_t seed = 7;
};

void cmd_model_spec(const ModelSpecArgs& a) {
    write_file_atomic(a.out, plant_spec_to_json(reference_plant_spec(a.seed)));
    note("wrote " + a.out);
}

// ---- corpus ----

struct CorpusSynthArgs {
    std::string spec, out_dir;
    std::size_t sentences = 200;
    std::size_t prompts = 100;
    std::uint64_t seed = 11;
};

void cmd_corpus_synth(const CorpusSynthArgs& a) {
    const PlantSpec spec = plant_spec_from_json(read_file(a.spec));
    spec.validate();
    const Vocabulary vocab = planted_vocabulary(spec);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    auto join = [](const std::vector<std::string>& lines) {
        std::string s;
        for (const auto& l : lines) s += l + "\n";
        return s;
    };
    auto lexicon = [&](Style s) {
        std::string out;
        for (TokenId t : spec.tokens(s)) out += vocab.token(t) + "\n";
        return out;
    };
    write_file_atomic(dir / "vocab.txt", vocab.to_file_text());
    write_file_atomic(dir / "style_a.txt", join(synth_style_sentences(spec, Style::A, a.sentences, a.seed)));
    write_file_atomic(dir / "style_b.txt", join(synth_style_sentences(spec, Style::B, a.sentences, a.seed + 1)));
    write_file_atomic(dir / "prompts_a.txt", join(synth_style_sentences(spec, Style::A, a.prompts, a.seed + 2)));
    write_file_atomic(dir / "prompts_b.txt", join(synth_style_sentences(spec, Style::B, a.prompts, a.seed + 3)));
    write_file_atomic(dir / "lexicon_a.txt", lexicon(Style::A));
    write_file_atomic(dir / "lexicon_b.txt", lexicon(Style::B));
    note("wrote vocab, corpora, prompts and lexica to " + dir.string());
}

// ---- atlas ----

struct AtlasBuildArgs {
    std::string model, vocab, corpus_a, corpus_b, out;
    std::string label_a = "A", label_b = "B";
    std::size_t k = 8;
    std::size_t k_grid = 0;
    std::size_t workers = 0;
};

StyleCorpus load_corpus(const std::string& label, const fs::path& path, const Vocabulary& vocab) {
    const auto pre = preprocess(read_lines(path));
    const auto& r = pre.report;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %zu lines, kept %zu (blank %zu, too long %zu, duplicate %zu, symbols %zu)",
                  path.string().c_str(), r.input_lines, r.kept, r.blank, r.too_long, r.duplicate, r.symbol_heavy);
    note(buf);
    if (pre.lines.empty()) fail(ErrorKind::Input, "corpus " + path.string() + " is empty after preprocessing");
    return make_corpus(label, pre.lines, pre.line_numbers, vocab);
}

void cmd_atlas_build(const AtlasBuildArgs& a) {
    const ModelWeights w = load_model(a.model);
    const Vocabulary vocab = load_vocab_for(a.vocab, w);
    const StyleCorpus ca = load_corpus(a.label_a, a.corpus_a, vocab);
    const StyleCorpus cb = load_corpus(a.label_b, a.corpus_b, vocab);
    if (a.label_a == a.label_b) fail(ErrorKind::Input, "style labels must differ");
    const std::size_t workers = a.workers == 0 ? default_workers() : a.workers;
    const std::size_t k = a.k_grid > 0 ? 500 * a.k_grid : a.k;
    const NeuronAtlas atlas = build_atlas(w, ca, cb, k, workers);
    save_atlas(atlas, a.out);
    note("wrote " + a.out + ": |N_" + a.label_a + "| = " + std::to_string(atlas.exclusive_a.size()) + ", |N_" +
         a.label_b + "| = " + std::to_string(atlas.exclusive_b.size()) +
         ", overlap = " + std::to_string(atlas.overlap.size()));
}

struct AtlasStatsArgs {
    std::string atlas, json_out;
};

void cmd_atlas_stats(const AtlasStatsArgs& a) {
    const NeuronAtlas atlas = load_atlas(a.atlas);
    const AtlasStats stats = atlas_stats(atlas);
    std::cout << format_atlas_stats(atlas, stats);
    if (!a.json_out.empty()) write_file_atomic(a.json_out, atlas_stats_to_json(atlas, stats));
}

// ---- decoding flags shared by transfer and inspect ----

struct DecodeFlags {
    std::string model, vocab, atlas;
    std::string strategy = "greedy";
    std::string deactivate = "none";
    std::string source;
    double alpha = 0.1;
    std::size_t style_layers = 4;
    std::vector<std::size_t> candidate_layers;
    double nucleus_p = 0.9;
    std::size_t max_new_tokens = 16;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    std::string stop_token;
};

void add_decode_flags(CLI::App* cmd, DecodeFlags& f) {
    cmd->add_option("--model", f.model, "Weight file")->required();
    cmd->add_option("--vocab", f.vocab, "Vocabulary file (one token per line)")->required();
    cmd->add_option("--atlas", f.atlas, "Atlas file; required unless --deactivate none");
    cmd->add_option("--strategy", f.strategy, "greedy | nucleus | dola_early | sneuron")->capture_default_str();
    cmd->add_option("--deactivate", f.deactivate, "none | source | target | both")->capture_default_str();
    cmd->add_option("--source", f.source, "Source style label (default: the atlas's first style)");
    cmd->add_option("--alpha", f.alpha, "Plausibility threshold relative to the top final-layer probability")
        ->capture_default_str();
    cmd->add_option("--style-layers", f.style_layers, "L: sneuron candidate layers are the last L below the final")
        ->capture_default_str();
    cmd->add_option("--candidate-layers", f.candidate_layers, "Explicit candidate layers i,j,k (overrides defaults)")
        ->delimiter(',');
    cmd->add_option("--nucleus-p", f.nucleus_p, "Top-p mass for nucleus sampling")->capture_default_str();
    cmd->add_option("--max-new-tokens", f.max_new_tokens, "Tokens to generate per input")->capture_default_str();
    f.seed_opt = cmd->add_option("--seed", f.seed, "Sampling seed; line i uses seed + i. Required for nucleus");
    cmd->add_option("--stop-token", f.stop_token, "Stop after generating this token");
}

DecodeConfig decode_config(const DecodeFlags& f, const Vocabulary& vocab) {
    DecodeConfig c;
    c.strategy = strategy_from_string(f.strategy);
    if (c.strategy == Strategy::Nucleus && f.seed_opt->count() == 0) {
        fail(ErrorKind::Usage, "--strategy nucleus needs an explicit --seed");
    }
    c.alpha = f.alpha;
    c.style_layer_count = f.style_layers;
    c.candidate_layers = f.candidate_layers;
    c.nucleus_p = f.nucleus_p;
    c.max_new_tokens = f.max_new_tokens;
    c.seed = f.seed;
    if (!f.stop_token.empty()) {
        auto id = vocab.find(f.stop_token);
        if (!id) fail(ErrorKind::Input, "stop token '" + f.stop_token + "' is not in the vocabulary");
        c.stop_token = *id;
    }
    c.validate();
    return c;
}

DeactivationMask decode_mask(const DecodeFlags& f, const ModelWeights& w) {
    const Deactivate which = deactivate_from_string(f.deactivate);
    if (which == Deactivate::None) return {};
    if (f.atlas.empty()) fail(ErrorKind::Usage, "--deactivate " + f.deactivate + " needs --atlas");
    const NeuronAtlas atlas = load_atlas(f.atlas);
    if (atlas.n_layers != w.config.n_layers || atlas.d_ffn != w.config.d_ffn) {
        fail(ErrorKind::Input, "atlas was built for " + std::to_string(atlas.n_layers) + " layers x " +
                                   std::to_string(atlas.d_ffn) + " neurons but the model has " +
                                   std::to_string(w.config.n_layers) + " x " + std::to_string(w.config.d_ffn));
    }
    const std::string source = f.source.empty() ? atlas.style_a : f.source;
    DeactivationMask mask = build_mask(atlas, DeactivationPolicy::from(which, source, other_style(atlas, source)));
    note("deactivating " + std::to_string(mask.size()) + " neurons (" + f.deactivate + ", source " + source + ")");
    return mask;
}

// ---- transfer ----

struct TransferArgs {
    DecodeFlags d;
    std::string input, out;
    std::size_t workers = 0;
};

json step_json(const StepRecord& s, const Vocabulary& vocab) {
    json j = {{"token", vocab.token(s.token)}, {"token_id", s.token}};
    j["M"] = s.premature_layer ? json(*s.premature_layer) : json(nullptr);
    j["jsd"] = s.divergences;
    j["phi_size"] = s.plausible.empty() ? json(nullptr) : json(s.plausible_size());
    return j;
}

void cmd_transfer(const TransferArgs& a) {
    const ModelWeights w = load_model(a.d.model);
    const Vocabulary vocab = load_vocab_for(a.d.vocab, w);
    const DecodeConfig base = decode_config(a.d, vocab);
    const DeactivationMask mask = decode_mask(a.d, w);

    std::vector<std::string> lines;
    for (auto& l : read_lines(a.input)) {
        if (!normalize_whitespace(l).empty()) lines.push_back(std::move(l));
    }
    std::vector<std::string> records(lines.size());
    const std::size_t workers = a.workers == 0 ? default_workers() : a.workers;
    parallel_for(lines.size(), workers, [&](std::size_t i) {
        DecodeConfig c = base;
        c.seed = base.seed + i;
        const auto prompt = tokenize(lines[i], vocab);
        const Generation g = generate(w, prompt, mask.empty() ? nullptr : &mask, c);
        json steps = json::array();
        for (const auto& s : g.steps) steps.push_back(step_json(s, vocab));
        json rec = {{"input", lines[i]},
                    {"output", detokenize(g.tokens, vocab)},
                    {"strategy", to_string(c.strategy)},
                    {"deactivate", a.d.deactivate},
                    {"steps", std::move(steps)}};
        records[i] = rec.dump();
    });
    std::string out;
    for (const auto& r : records) out += r + "\n";
    write_file_atomic(a.out, out);
    note("wrote " + std::to_string(records.size()) + " records to " + a.out);
}

// ---- eval ----

struct EvalArgs {
    std::string model, vocab, src, hyp, transfer, lexicon, json_out;
    std::size_t workers = 0;
};

void cmd_eval(const EvalArgs& a) {
    std::vector<std::string> src, hyp;
    if (!a.transfer.empty()) {
        if (!a.src.empty() || !a.hyp.empty()) fail(ErrorKind::Usage, "use either --transfer or --src/--hyp");
        std::size_t n = 0;
        for (const auto& line : read_lines(a.transfer)) {
            ++n;
            if (line.empty()) continue;
            try {
                const json j = json::parse(line);
                src.push_back(j.at("input").get<std::string>());
                hyp.push_back(j.at("output").get<std::string>());
            } catch (const json::exception& e) {
                fail(ErrorKind::Format, a.transfer + " line " + std::to_string(n) + ": " + e.what());
            }
        }
    } else {
        if (a.src.empty() || a.hyp.empty()) fail(ErrorKind::Usage, "eval needs --transfer or both --src and --hyp");
        src = read_lines(a.src);
        hyp = read_lines(a.hyp);
    }

    const ModelWeights w = load_model(a.model);
    const Vocabulary vocab = load_vocab_for(a.vocab, w);
    const std::set<TokenId> lexicon = load_lexicon(a.lexicon, vocab);

    EvalReport report;
    report.count = hyp.size();
    report.copy_ratio = copy_ratio(src, hyp);
    std::vector<std::vector<TokenId>> seqs;
    for (const auto& h : hyp) seqs.push_back(tokenize(h, vocab));
    const auto ppl = perplexity(w, seqs, a.workers == 0 ? default_workers() : a.workers);
    if (ppl.scored == 0) fail(ErrorKind::Input, "no hypothesis has a token to score");
    if (ppl.skipped > 0) note("warning: " + std::to_string(ppl.skipped) + " empty hypotheses skipped for perplexity");
    report.mean_perplexity = ppl.mean;
    report.perplexity_scored = ppl.scored;
    report.perplexity_skipped = ppl.skipped;
    report.target_lexicon_rate = lexicon_rate(seqs, lexicon);
    if (!std::isfinite(report.mean_perplexity)) fail(ErrorKind::Invariant, "perplexity is not finite");

    std::cout << format_eval_report(report);
    if (!a.json_out.empty()) write_file_atomic(a.json_out, eval_report_to_json(report));
}

// ---- inspect ----

struct InspectArgs {
    DecodeFlags d;
    std::string text, out;
};

void cmd_inspect_jsd(const InspectArgs& a) {
    const ModelWeights w = load_model(a.d.model);
    const Vocabulary vocab = load_vocab_for(a.d.vocab, w);
    const DecodeConfig c = decode_config(a.d, vocab);
    const DeactivationMask mask = decode_mask(a.d, w);
    const auto prompt = tokenize(a.text, vocab);
    const JsdProfile prof = jsd_profile(w, prompt, mask.empty() ? nullptr : &mask, c);

    std::printf("%6s", "layer");
    for (TokenId t : prof.tokens) std::printf(" %9s", vocab.token(t).c_str());
    std::printf("\n");
    for (std::size_t j = 0; j < prof.n_layers; ++j) {
        std::printf("%6zu", j);
        for (std::size_t s = 0; s < prof.steps(); ++s) std::printf(" %9.5f", prof.at(j, s));
        std::printf("\n");
    }
    write_file_atomic(a.out, jsd_profile_to_csv(prof));
    note("wrote " + std::to_string(prof.n_layers) + " x " + std::to_string(prof.steps()) + " profile to " + a.out);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Style-neuron steering on toy transformers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "sneuron 0.1");
    std::string backend = "auto";
    app.add_option("--kernels", backend, "Kernel backend: auto | scalar | avx2 | neon")->capture_default_str();

    std::function<void()> run;

    auto* model = app.add_subcommand("model", "Create weight files")->require_subcommand(1);

    ModelSynthArgs synth;
    auto* c = model->add_subcommand("synth", "Build a planted model from a spec; also writes the plant registry");
    c->add_option("--spec", synth.spec, "Plant spec (JSON)")->required();
    c->add_option("--out", synth.out, "Weight file to write")->required();
    c->add_option("--registry", synth.registry, "Registry path (default: <out>.registry.json)");
    c->callback([&] { run = [&] { cmd_model_synth(synth); }; });

    ModelRandomArgs rnd;
    c = model->add_subcommand("random", "Random Gaussian weights for a config");
    c->add_option("--config", rnd.config, "Model config (JSON)")->required();
    c->add_option("--seed", rnd.seed, "RNG seed")->required();
    c->add_option("--scale", rnd.scale, "Entries are N(0,1) * scale / sqrt(d_model)")->capture_default_str();
    c->add_option("--out", rnd.out, "Weight file to write")->required();
    c->callback([&] { run = [&] { cmd_model_random(rnd); }; });

    ModelSpecArgs spec;
    c = model->add_subcommand("spec", "Write the reference planted spec (4 layers, d_model 32, 8+8 plants)");
    c->add_option("--seed", spec.seed, "Seed for plant placement")->capture_default_str();
    c->add_option("--out", spec.out, "Spec file to write")->required();
    c->callback([&] { run = [&] { cmd_model_spec(spec); }; });

    auto* corpus = app.add_subcommand("corpus", "Synthetic corpora")->require_subcommand(1);
    CorpusSynthArgs cs;
    c = corpus->add_subcommand("synth", "Vocabulary, style corpora, prompts and lexica for a planted spec");
    c->add_option("--spec", cs.spec, "Plant spec (JSON)")->required();
    c->add_option("--out-dir", cs.out_dir, "Output directory")->required();
    c->add_option("--sentences", cs.sentences, "Sentences per style corpus")->capture_default_str();
    c->add_option("--prompts", cs.prompts, "Prompts per style")->capture_default_str();
    c->add_option("--seed", cs.seed, "RNG seed")->capture_default_str();
    c->callback([&] { run = [&] { cmd_corpus_synth(cs); }; });

    auto* atlas = app.add_subcommand("atlas", "Style-specific neuron atlases")->require_subcommand(1);
    AtlasBuildArgs ab;
    c = atlas->add_subcommand("build", "Score neurons on two style corpora and keep the exclusive top-k sets");
    c->add_option("--model", ab.model, "Weight file")->required();
    c->add_option("--vocab", ab.vocab, "Vocabulary file")->required();
    c->add_option("--corpus-a", ab.corpus_a, "Style A corpus, one sentence per line")->required();
    c->add_option("--corpus-b", ab.corpus_b, "Style B corpus, one sentence per line")->required();
    c->add_option("--label-a", ab.label_a, "Style A label")->capture_default_str();
    c->add_option("--label-b", ab.label_b, "Style B label")->capture_default_str();
    auto* k_opt = c->add_option("--k", ab.k, "Top-k active neurons per style")->capture_default_str();
    c->add_option("--k-grid", ab.k_grid, "Use k = 500 * n, n in 1..20")->check(CLI::Range(1, 20))->excludes(k_opt);
    c->add_option("--workers", ab.workers, "Threads (0 = hardware concurrency)")->capture_default_str();
    c->add_option("--out", ab.out, "Atlas file to write")->required();
    c->callback([&] { run = [&] { cmd_atlas_build(ab); }; });

    AtlasStatsArgs as;
    c = atlas->add_subcommand("stats", "Overlap fraction and per-layer histogram");
    c->add_option("--atlas", as.atlas, "Atlas file")->required();
    c->add_option("--json", as.json_out, "Also write the report as JSON");
    c->callback([&] { run = [&] { cmd_atlas_stats(as); }; });

    TransferArgs tr;
    c = app.add_subcommand("transfer", "Generate continuations for each input line");
    add_decode_flags(c, tr.d);
    c->add_option("--input", tr.input, "Input text, one prompt per line (blank lines skipped)")->required();
    c->add_option("--out", tr.out, "JSONL results")->required();
    c->add_option("--workers", tr.workers, "Threads (0 = hardware concurrency)")->capture_default_str();
    c->callback([&] { run = [&] { cmd_transfer(tr); }; });

    EvalArgs ev;
    c = app.add_subcommand("eval", "Copy ratio, perplexity and target lexicon rate");
    c->add_option("--model", ev.model, "Scoring model")->required();
    c->add_option("--vocab", ev.vocab, "Vocabulary file")->required();
    c->add_option("--transfer", ev.transfer, "transfer JSONL (uses input/output fields)");
    c->add_option("--src", ev.src, "Source lines");
    c->add_option("--hyp", ev.hyp, "Hypothesis lines aligned with --src");
    c->add_option("--lexicon", ev.lexicon, "Target-style lexicon, one token per line")->required();
    c->add_option("--json", ev.json_out, "Also write the report as JSON");
    c->add_option("--workers", ev.workers, "Threads (0 = hardware concurrency)")->capture_default_str();
    c->callback([&] { run = [&] { cmd_eval(ev); }; });

    auto* inspect = app.add_subcommand("inspect", "Diagnostics")->require_subcommand(1);
    InspectArgs in;
    c = inspect->add_subcommand("jsd", "JSD between every layer's early exit and the final layer, per step");
    add_decode_flags(c, in.d);
    c->add_option("--text", in.text, "Prompt text")->required();
    c->add_option("--out", in.out, "CSV to write (layers x steps)")->required();
    c->callback([&] { run = [&] { cmd_inspect_jsd(in); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (backend != "auto") {
            kernels::Backend b = kernels::Backend::Scalar;
            if (backend == "avx2") b = kernels::Backend::Avx2;
            else if (backend == "neon") b = kernels::Backend::Neon;
            else if (backend != "scalar") fail(ErrorKind::Usage, "unknown kernel backend '" + backend + "'");
            if (!kernels::is_available(b)) fail(ErrorKind::Usage, "kernel backend '" + backend + "' unavailable");
            kernels::select(b);
        }
        if (run) run();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}
