// spikerl command-line driver: run, evaluate, optimize, render-weights, calibrate.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "spikerl/config.hpp"
#include "spikerl/experiment.hpp"
#include "spikerl/ga.hpp"

namespace fs = std::filesystem;
using namespace spikerl;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CliError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw CliError("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// Collects artifacts in memory and writes them, plus the manifest, at the end.
class OutputDir {
public:
    explicit OutputDir(const std::string& path)
        : dir_(path)
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_))
            throw CliError("cannot create output directory " + path);
        const fs::path probe = dir_ / ".spikerl-write-test";
        std::ofstream test(probe);
        if (!test)
            throw CliError("output directory is not writable: " + path);
        test.close();
        fs::remove(probe, ec);
    }

    void add(const std::string& name, std::string content)
    {
        files_.emplace_back(name, std::move(content));
    }

    void write(const std::string& command, const std::string& seeds, const std::string& config)
    {
        std::string manifest = "spikerl-manifest 1\ncommand " + command + "\n" + seeds;
        manifest += "[config]\n" + config + "[artifacts]\n";
        for (const auto& [name, content] : files_) {
            write_file(name, content);
            manifest += sha256_hex(content) + "  " + name + "\n";
        }
        write_file("manifest.txt", manifest);
    }

private:
    void write_file(const std::string& name, const std::string& content)
    {
        const fs::path p = dir_ / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            throw CliError("cannot write " + p.string());
    }

    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

struct Common {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> env_seed;
    std::optional<std::uint64_t> network_seed;
    std::optional<std::int64_t> train_ms;
    std::optional<std::int64_t> eval_ms;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true)
{
    cmd->add_option("-c,--config", c.config_path, "key = value configuration file");
    auto* out = cmd->add_option("-o,--out", c.out, "output directory");
    if (needs_out)
        out->required();
    cmd->add_option("--seed", c.env_seed, "environment seed");
    cmd->add_option("--network-seed", c.network_seed, "network seed");
    cmd->add_option("--train-ms", c.train_ms, "training length (ms)");
    cmd->add_option("--eval-ms", c.eval_ms, "evaluation length (ms)");
}

RunConfig load_config(const Common& c)
{
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : parse_config(read_file(c.config_path));
    if (c.env_seed)
        cfg.env_seed = *c.env_seed;
    if (c.network_seed)
        cfg.network.rng_seed = *c.network_seed;
    if (c.train_ms)
        cfg.episode.train_ms = *c.train_ms;
    if (c.eval_ms)
        cfg.episode.eval_ms = *c.eval_ms;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

EncoderCalibration calibrate_or_throw(const EnvironmentParams& p)
{
    const CalibrationReport rep = calibrate_encoder(p);
    if (!rep.ok)
        throw CliError("encoder calibration failed: " + rep.diagnostic);
    return rep.calibration;
}

std::string seed_lines(const RunConfig& cfg)
{
    return "network_seed " + std::to_string(cfg.network.rng_seed) + "\nenv_seed "
           + std::to_string(cfg.env_seed) + "\n";
}

std::string fmt6(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

int cmd_run(const Common& c, bool trace)
{
    const RunConfig cfg = load_config(c);
    OutputDir out(c.out);
    const EncoderCalibration cal = calibrate_or_throw(cfg.environment);
    EpisodeOptions opt = cfg.episode;
    opt.record_trace = trace;
    const EpisodeResult res = run_episode(cfg.network, cfg.environment, cal, cfg.env_seed, opt);

    out.add("learning_curve.csv", export_learning_curve(res));
    out.add("weights.txt", serialize_weights(res.final_weights, cfg.network.neurons_per_group));
    out.add("weights.ppm",
            encode_ppm(export_weight_image(res.final_weights, cfg.network.neurons_per_group)));
    if (trace)
        out.add("trace.csv", export_trace_csv(res));
    out.add("result.txt", "criterion " + fmt6(res.criterion) + "\nreward_spikes "
                              + std::to_string(res.reward_spikes) + "\npunish_spikes "
                              + std::to_string(res.punish_spikes) + "\ncommand_spikes "
                              + std::to_string(res.command_spikes) + "\n");
    out.write("run", seed_lines(cfg), serialize_config(cfg));
    std::cout << "criterion " << fmt6(res.criterion) << "\n";
    return 0;
}

int cmd_evaluate(const Common& c, int trials, int jobs)
{
    if (trials < 1)
        throw CliError("--trials must be >= 1");
    const RunConfig cfg = load_config(c);
    OutputDir out(c.out);
    const EncoderCalibration cal = calibrate_or_throw(cfg.environment);

    std::vector<double> crit(trials);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < trials; i = next++)
            crit[i] = run_episode(cfg.network, cfg.environment, cal, cfg.env_seed + i,
                                  cfg.episode).criterion;
    };
    std::vector<std::thread> pool;
    for (int j = 1; j < std::clamp(jobs, 1, trials); ++j)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    std::string csv = "env_seed,criterion\n";
    double sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        csv += std::to_string(cfg.env_seed + i) + "," + fmt6(crit[i]) + "\n";
        std::cout << "seed " << cfg.env_seed + i << " criterion " << fmt6(crit[i]) << "\n";
        sum += crit[i];
    }
    const double mean = sum / trials;
    const auto [lo, hi] = std::minmax_element(crit.begin(), crit.end());
    std::cout << "mean " << fmt6(mean) << " min " << fmt6(*lo) << " max " << fmt6(*hi) << "\n";
    out.add("evaluate.csv", csv);
    out.write("evaluate", seed_lines(cfg) + "trials " + std::to_string(trials) + "\n",
              serialize_config(cfg));
    return 0;
}

int cmd_optimize(const Common& c, const std::string& resume_path)
{
    const RunConfig cfg = load_config(c);
    OutputDir out(c.out);
    const fs::path dir(c.out);

    EvalContext ctx;
    ctx.base = cfg.network;
    ctx.env = cfg.environment;
    ctx.cal = calibrate_or_throw(cfg.environment);
    ctx.episode = cfg.episode;
    for (int i = 0; i < cfg.ga.trials_per_genome; ++i)
        ctx.env_seeds.push_back(cfg.ga_eval_seed + static_cast<std::uint64_t>(i));

    std::optional<GaCheckpoint> resume;
    std::string log = ga_log_header();
    if (!resume_path.empty()) {
        std::error_code ec;
        if (fs::equivalent(fs::path(resume_path).parent_path(), dir, ec))
            throw CliError("--resume must point outside the output directory");
        resume = parse_checkpoint(read_file(resume_path));
        const fs::path old_log = fs::path(resume_path).parent_path() / "ga_log.csv";
        if (fs::exists(old_log)) {
            // Keep the rows up to the checkpointed generation.
            std::istringstream in(read_file(old_log.string()));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line))
                if (std::stoi(line.substr(0, line.find(','))) <= resume->generation)
                    log += line + "\n";
        }
    }

    auto on_generation = [&](const GenerationStats& s, const GaCheckpoint& cp) {
        log += ga_log_row(s);
        // Checkpoint and log are rewritten every generation so a crash loses one at most.
        std::ofstream(dir / "ga_log.csv", std::ios::trunc) << log;
        std::ofstream(dir / "checkpoint.txt", std::ios::trunc) << serialize_checkpoint(cp);
        std::cout << "generation " << s.generation << " best " << fmt6(s.best) << " mean "
                  << fmt6(s.mean) << std::endl;
    };
    auto on_error = [](int index, const std::string& what) {
        std::cerr << "genome " << index << " scored 0: " << what << "\n";
    };
    const GaResult res = run_ga(cfg.ga, ctx, on_generation, resume, on_error);

    RunConfig best = cfg;
    best.network = config_from_genome(res.best.genome, cfg.network);
    out.add("ga_log.csv", log);
    out.add("checkpoint.txt", serialize_checkpoint(res.last));
    out.add("best_config.txt", serialize_config(best));
    std::string seeds = seed_lines(cfg) + "ga_seed " + std::to_string(cfg.ga.rng_seed)
                        + "\nga_eval_seeds";
    for (auto s : ctx.env_seeds)
        seeds += " " + std::to_string(s);
    out.write("optimize", seeds + "\n", serialize_config(cfg));
    std::cout << "best fitness " << fmt6(res.best.fitness.value_or(0.0)) << "\n";
    return 0;
}

int cmd_render(const std::string& in_path, const std::string& out_dir, double threshold)
{
    int npg = 0;
    const WeightSnapshot w = parse_weights(read_file(in_path), npg);
    OutputDir out(out_dir);
    out.add("weights.ppm", encode_ppm(export_weight_image(w, npg, threshold)));
    out.write("render-weights", "", "input " + in_path + "\nthreshold " + fmt6(threshold) + "\n");
    return 0;
}

int cmd_calibrate(const Common& c)
{
    const RunConfig cfg = load_config(c);
    const CalibrationReport rep = calibrate_encoder(cfg.environment);
    if (!rep.ok)
        throw CliError("encoder calibration failed: " + rep.diagnostic);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "rate_gain %.17g\nchange_threshold_up %.17g\nchange_threshold_down %.17g\n"
                  "expected_rate_hz %.6f\n",
                  rep.calibration.rate_gain, rep.calibration.change_threshold_up,
                  rep.calibration.change_threshold_down, rep.expected_rate_hz);
    std::cout << buf;
    if (!c.out.empty()) {
        OutputDir out(c.out);
        out.add("calibration.txt", buf);
        out.write("calibrate", "calibration_seed " + std::to_string(cfg.environment.calibration_seed)
                                   + "\n",
                  serialize_config(cfg));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spiking reinforcement-learning light-spot tracker"};
    app.require_subcommand(1);

    Common run_opts, eval_opts, opt_opts, cal_opts;
    bool trace = false;
    int trials = 3, jobs = 1;
    std::string resume, render_in, render_out;
    double threshold = 30.0;

    auto* run = app.add_subcommand("run", "train and evaluate one episode");
    add_common(run, run_opts);
    run->add_flag("--trace", trace, "write the per-step trace");

    auto* evaluate = app.add_subcommand("evaluate", "mean criterion over several seeds");
    add_common(evaluate, eval_opts);
    evaluate->add_option("--trials", trials, "number of environment seeds")->capture_default_str();
    evaluate->add_option("-j,--jobs", jobs, "parallel episodes")->capture_default_str();

    auto* optimize = app.add_subcommand("optimize", "genetic parameter search");
    add_common(optimize, opt_opts);
    optimize->add_option("--resume", resume, "checkpoint file to continue from");

    auto* render = app.add_subcommand("render-weights", "weight snapshot to PPM image");
    render->add_option("-i,--in", render_in, "weight snapshot")->required();
    render->add_option("-o,--out", render_out, "output directory")->required();
    render->add_option("--threshold", threshold, "strong-connection threshold")
        ->capture_default_str();

    auto* calibrate = app.add_subcommand("calibrate", "solve the encoder gains");
    add_common(calibrate, cal_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(run_opts, trace);
        if (*evaluate)
            return cmd_evaluate(eval_opts, trials, jobs);
        if (*optimize)
            return cmd_optimize(opt_opts, resume);
        if (*render)
            return cmd_render(render_in, render_out, threshold);
        if (*calibrate)
            return cmd_calibrate(cal_opts);
    } catch (const std::exception& e) {
        std::cerr << "spikerl: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
