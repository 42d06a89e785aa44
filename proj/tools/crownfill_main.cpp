#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "crownfill/arch.hpp"
#include "crownfill/augment.hpp"
#include "crownfill/config.hpp"
#include "crownfill/error.hpp"
#include "crownfill/marching_cubes.hpp"
#include "crownfill/metrics.hpp"
#include "crownfill/trainer.hpp"

namespace fs = std::filesystem;
using namespace crownfill;

namespace {

// Exit codes: 0 ok, 2 config, 3 I/O, 4 validation, 5 numeric, 1 other.
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitValidation = 4;
constexpr int kExitNumeric = 5;

void write_run_record(const std::string& path, const std::string& command,
                      const nlohmann::json& effective) {
    nlohmann::json j;
    j["tool"] = "crownfill";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config"] = effective;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write run record " + path);
    os << j.dump(1) << '\n';
}

std::string labels_path_for(const std::string& mesh_path) {
    fs::path p(mesh_path);
    p.replace_extension("");
    return p.string() + ".labels.json";
}

void apply_threads(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

int cmd_phantom(uint64_t seed, const std::string& out_dir) {
    fs::create_directories(out_dir);
    LabeledArch lower = generate_phantom_arch(seed, Jaw::Lower);
    LabeledArch upper = generate_phantom_arch(seed, Jaw::Upper);
    save_arch(lower, (fs::path(out_dir) / "phantom_lower.obj").string(),
              (fs::path(out_dir) / "phantom_lower.labels.json").string());
    save_arch(upper, (fs::path(out_dir) / "phantom_upper.obj").string(),
              (fs::path(out_dir) / "phantom_upper.labels.json").string());
    write_run_record((fs::path(out_dir) / "run_record.json").string(), "phantom",
                     {{"seed", seed}, {"out_dir", out_dir}});
    std::cerr << "[phantom] wrote lower (" << lower.mesh.vertices.size() << " verts) and upper ("
              << upper.mesh.vertices.size() << " verts) arches to " << out_dir << "\n";
    return 0;
}

AugmentConfig augment_config_from(const KeyValueConfig& cfg) {
    AugmentConfig out;
    out.max_primitives = static_cast<int>(cfg.get_int("max_primitives", 3));
    out.size_min = cfg.get_double("size_min", 0.2);
    out.size_max = cfg.get_double("size_max", 0.5);
    out.noise.amplitude = cfg.get_double("noise_amplitude", 0.06);
    out.noise.frequency = cfg.get_double("noise_frequency", 2.8);
    out.variants_per_tooth = static_cast<int>(cfg.get_int("variants_per_tooth", 1));
    out.resolution = static_cast<int>(cfg.get_int("resolution", 32));
    out.validate();
    return out;
}

int cmd_augment(const std::string& config_path, const std::string& out_override, int threads) {
    KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    cfg.restrict_keys({"arches", "antagonists", "out_dir", "resolution", "max_primitives",
                       "size_min", "size_max", "noise_amplitude", "noise_frequency",
                       "variants_per_tooth", "seed", "threads"});
    apply_threads(threads > 0 ? threads : static_cast<int>(cfg.get_int("threads", 0)));

    std::vector<std::string> arch_paths = cfg.get_list("arches");
    if (arch_paths.empty()) throw ConfigError("augment: \"arches\" must list at least one OBJ");
    std::vector<std::string> antagonist_paths = cfg.get_list("antagonists");
    if (!antagonist_paths.empty() && antagonist_paths.size() != arch_paths.size())
        throw ConfigError("augment: \"antagonists\" must align with \"arches\"");

    std::string out_dir = out_override.empty() ? cfg.get_string("out_dir") : out_override;
    uint64_t seed = cfg.get_uint("seed", 0);
    AugmentConfig aug = augment_config_from(cfg);

    std::vector<ArchPair> pairs;
    for (size_t i = 0; i < arch_paths.size(); ++i) {
        ArchPair pair;
        pair.arch = load_arch(arch_paths[i], labels_path_for(arch_paths[i]));
        if (!antagonist_paths.empty())
            pair.antagonist =
                load_arch(antagonist_paths[i], labels_path_for(antagonist_paths[i]));
        pairs.push_back(std::move(pair));
    }

    Manifest manifest = build_dataset(pairs, aug, seed, out_dir);
    nlohmann::json echo;
    for (const auto& [k, v] : cfg.values()) echo[k] = v;
    echo["out_dir"] = out_dir;
    echo["seed"] = seed;
    write_run_record((fs::path(out_dir) / "run_record.json").string(), "augment", echo);
    std::cerr << "[augment] wrote " << manifest.entries.size() << " samples to " << out_dir
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, int threads) {
    KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    cfg.restrict_keys({"manifest", "out_checkpoint", "loss_log", "steps", "lr", "timesteps",
                       "dropout_p", "w", "resolution", "base_channels", "channel_mults",
                       "time_embed_dim", "proj_channels", "antagonist_enabled", "seed",
                       "data_scale", "threads"});
    apply_threads(threads > 0 ? threads : static_cast<int>(cfg.get_int("threads", 0)));

    std::string manifest_path = cfg.get_string("manifest");
    std::string ckpt_path = cfg.get_string("out_checkpoint");
    std::string loss_log = cfg.get_string("loss_log", ckpt_path + ".loss.csv");
    int steps = static_cast<int>(cfg.get_int("steps", 1000));
    int T = static_cast<int>(cfg.get_int("timesteps", 1000));
    uint64_t seed = cfg.get_uint("seed", 0);
    double data_scale = cfg.get_double("data_scale", kDataScale);

    GuidanceConfig guidance;
    guidance.w = cfg.get_double("w", 2.0);
    guidance.dropout_p = cfg.get_double("dropout_p", 0.10);
    guidance.validate();

    UNetConfig net_cfg;
    net_cfg.resolution = static_cast<int>(cfg.get_int("resolution", 16));
    net_cfg.base_channels = static_cast<int>(cfg.get_int("base_channels", 16));
    net_cfg.channel_mults = cfg.get_int_list("channel_mults", {1, 2, 4});
    net_cfg.time_embed_dim = static_cast<int>(cfg.get_int("time_embed_dim", 0));
    net_cfg.proj_channels = static_cast<int>(cfg.get_int("proj_channels", 0));
    net_cfg.antagonist_enabled = cfg.get_bool("antagonist_enabled", true);
    net_cfg.validate();

    Manifest manifest = load_manifest(manifest_path);
    if (manifest.entries.empty()) throw ValidationError("train: manifest has no samples");
    std::string base_dir = fs::path(manifest_path).parent_path().string();
    std::vector<CompletionSample> samples;
    for (const auto& e : manifest.entries) samples.push_back(load_sample(e, base_dir));
    std::cerr << "[train] " << samples.size() << " samples, " << steps << " steps, T=" << T
              << "\n";

    NoiseSchedule schedule = linear_schedule(T);
    DenoiserNetwork network(net_cfg, mix_seed(seed, 0xA));
    SecondMomentResampler resampler(T);
    AdamOptimizer optimizer(cfg.get_double("lr", 1e-4));
    Rng rng(mix_seed(seed, 0xB));

    std::ofstream log(loss_log);
    if (!log) throw IoError("train: cannot open loss log " + loss_log);
    log << "step,sample,loss\n";
    for (int s = 0; s < steps; ++s) {
        size_t pick = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(samples.size()) - 1));
        double loss = train_step(network, samples[pick], schedule, guidance, resampler, optimizer,
                                 rng, data_scale);
        log << s << ',' << manifest.entries[pick].id << ',' << loss << '\n';
        if ((s + 1) % 100 == 0) std::cerr << "[train] step " << s + 1 << " loss " << loss << "\n";
    }

    save_checkpoint(network, schedule, guidance, data_scale, ckpt_path);
    nlohmann::json echo;
    for (const auto& [k, v] : cfg.values()) echo[k] = v;
    echo["seed"] = seed;
    write_run_record(ckpt_path + ".runrecord.json", "train", echo);
    std::cerr << "[train] checkpoint written to " << ckpt_path << "\n";
    return 0;
}

int cmd_complete(const std::string& ckpt_path, const std::string& context_path,
                 const std::string& antagonist_path, int steps, double w, uint64_t seed,
                 const std::string& out_prefix, int threads) {
    apply_threads(threads);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::unique_ptr<DenoiserNetwork> network = restore_network(ckpt);
    SdfGrid context = load_sdfg(context_path);
    std::optional<SdfGrid> antagonist;
    if (!antagonist_path.empty()) antagonist = load_sdfg(antagonist_path);

    SdfGrid completed = complete(*network, ckpt.schedule, context,
                                 antagonist ? &*antagonist : nullptr, steps, w, seed,
                                 ckpt.data_scale);
    save_sdfg(completed, out_prefix + ".sdfg");
    save_obj(marching_cubes(completed), out_prefix + ".obj");
    write_run_record(out_prefix + ".runrecord.json", "complete",
                     {{"checkpoint", ckpt_path},
                      {"context", context_path},
                      {"antagonist", antagonist_path},
                      {"steps", steps},
                      {"w", w},
                      {"seed", seed},
                      {"out", out_prefix}});
    std::cerr << "[complete] wrote " << out_prefix << ".sdfg and .obj\n";
    return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& ckpt_path,
             const std::string& predictions_dir, const std::string& out_dir, int steps, double w,
             uint64_t seed, int chamfer_samples, int threads) {
    apply_threads(threads);
    if (ckpt_path.empty() == predictions_dir.empty())
        throw ConfigError("eval: exactly one of --checkpoint / --predictions is required");
    fs::create_directories(out_dir);

    Manifest manifest = load_manifest(manifest_path);
    std::string base_dir = fs::path(manifest_path).parent_path().string();

    std::optional<Checkpoint> ckpt;
    std::unique_ptr<DenoiserNetwork> network;
    if (!ckpt_path.empty()) {
        ckpt = load_checkpoint(ckpt_path);
        network = restore_network(*ckpt);
    }

    std::vector<std::pair<std::string, MetricReport>> reports;
    int failures = 0;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& entry = manifest.entries[i];
        try {
            CompletionSample sample = load_sample(entry, base_dir);
            SdfGrid pred = [&] {
                if (network) {
                    const SdfGrid* ant = sample.antagonist ? &*sample.antagonist : nullptr;
                    if (ant && !network->config().antagonist_enabled) ant = nullptr;
                    return complete(*network, ckpt->schedule, sample.context, ant, steps, w,
                                    mix_seed(seed, i), ckpt->data_scale);
                }
                return load_sdfg((fs::path(predictions_dir) / (entry.id + ".pred.sdfg")).string());
            }();
            reports.emplace_back(entry.id, evaluate_sample(pred, sample, chamfer_samples));
            std::cerr << "[eval] " << entry.id << " done (" << i + 1 << "/"
                      << manifest.entries.size() << ")\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << "[eval] " << entry.id << " failed: " << e.what() << "\n";
        }
    }

    write_reports_jsonl(reports, (fs::path(out_dir) / "reports.jsonl").string());
    AggregateTable table = aggregate_reports(reports);
    {
        std::ofstream os((fs::path(out_dir) / "aggregate.json").string());
        os << aggregate_to_json(table) << '\n';
    }
    {
        std::ofstream os((fs::path(out_dir) / "aggregate.txt").string());
        os << aggregate_to_text(table);
    }
    std::cerr << aggregate_to_text(table);
    write_run_record((fs::path(out_dir) / "run_record.json").string(), "eval",
                     {{"manifest", manifest_path},
                      {"checkpoint", ckpt_path},
                      {"predictions", predictions_dir},
                      {"steps", steps},
                      {"w", w},
                      {"seed", seed},
                      {"chamfer_samples", chamfer_samples},
                      {"failures", failures}});
    return 0;
}

int cmd_mesh(const std::string& in_path, const std::string& out_path, double iso) {
    SdfGrid grid = load_sdfg(in_path);
    TriangleMesh mesh = marching_cubes(grid, iso);
    save_obj(mesh, out_path);
    write_run_record(out_path + ".runrecord.json", "mesh",
                     {{"in", in_path}, {"out", out_path}, {"iso", iso}});
    std::cerr << "[mesh] " << mesh.vertices.size() << " vertices, " << mesh.faces.size()
              << " faces -> " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crownfill: SDF tooth-crown completion pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // phantom
    auto* phantom = app.add_subcommand("phantom", "generate a procedural labeled arch pair");
    uint64_t phantom_seed = 0;
    std::string phantom_out = "phantom";
    phantom->add_option("--seed", phantom_seed, "master seed");
    phantom->add_option("--out", phantom_out, "output directory")->required();

    // augment
    auto* augment = app.add_subcommand("augment", "build a completion dataset from arches");
    std::string augment_config, augment_out;
    int augment_threads = 0;
    augment->add_option("--config", augment_config, "key=value config file")->required();
    augment->add_option("--out", augment_out, "override out_dir");
    augment->add_option("--threads", augment_threads, "worker thread cap");

    // train
    auto* train = app.add_subcommand("train", "train the denoiser on a dataset");
    std::string train_config;
    int train_threads = 0;
    train->add_option("--config", train_config, "key=value config file")->required();
    train->add_option("--threads", train_threads, "worker thread cap");

    // complete
    auto* complete_cmd = app.add_subcommand("complete", "run the reverse diffusion on a context");
    std::string cmp_ckpt, cmp_context, cmp_antagonist, cmp_out = "completed";
    int cmp_steps = 100, cmp_threads = 0;
    double cmp_w = 2.0;
    uint64_t cmp_seed = 0;
    complete_cmd->add_option("--checkpoint", cmp_ckpt)->required();
    complete_cmd->add_option("--context", cmp_context, "context .sdfg")->required();
    complete_cmd->add_option("--antagonist", cmp_antagonist, "antagonist .sdfg");
    complete_cmd->add_option("--steps", cmp_steps, "respaced reverse steps");
    complete_cmd->add_option("--w", cmp_w, "guidance mixing factor");
    complete_cmd->add_option("--seed", cmp_seed);
    complete_cmd->add_option("--out", cmp_out, "output prefix");
    complete_cmd->add_option("--threads", cmp_threads);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score completions against a manifest");
    std::string eval_manifest, eval_ckpt, eval_pred, eval_out = "eval";
    int eval_steps = 100, eval_chamfer = 10000, eval_threads = 0;
    double eval_w = 2.0;
    uint64_t eval_seed = 0;
    eval_cmd->add_option("--manifest", eval_manifest)->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "sample completions from this checkpoint");
    eval_cmd->add_option("--predictions", eval_pred, "directory of <id>.pred.sdfg files");
    eval_cmd->add_option("--out", eval_out, "output directory");
    eval_cmd->add_option("--steps", eval_steps);
    eval_cmd->add_option("--w", eval_w);
    eval_cmd->add_option("--seed", eval_seed);
    eval_cmd->add_option("--chamfer-samples", eval_chamfer);
    eval_cmd->add_option("--threads", eval_threads);

    // mesh
    auto* mesh_cmd = app.add_subcommand("mesh", "extract an isosurface OBJ from a .sdfg");
    std::string mesh_in, mesh_out;
    double mesh_iso = 0.0;
    mesh_cmd->add_option("--in", mesh_in)->required();
    mesh_cmd->add_option("--out", mesh_out)->required();
    mesh_cmd->add_option("--iso", mesh_iso, "iso level");

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom->parsed()) return cmd_phantom(phantom_seed, phantom_out);
        if (augment->parsed()) return cmd_augment(augment_config, augment_out, augment_threads);
        if (train->parsed()) return cmd_train(train_config, train_threads);
        if (complete_cmd->parsed())
            return cmd_complete(cmp_ckpt, cmp_context, cmp_antagonist, cmp_steps, cmp_w, cmp_seed,
                                cmp_out, cmp_threads);
        if (eval_cmd->parsed())
            return cmd_eval(eval_manifest, eval_ckpt, eval_pred, eval_out, eval_steps, eval_w,
                            eval_seed, eval_chamfer, eval_threads);
        if (mesh_cmd->parsed()) return cmd_mesh(mesh_in, mesh_out, mesh_iso);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
