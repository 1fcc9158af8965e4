// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance [--cli path/to/spikerl] [--only N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "spikerl/experiment.hpp"
#include "spikerl/ga.hpp"

using namespace spikerl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

const EncoderCalibration& calibration()
{
    static const CalibrationReport rep = calibrate_encoder(EnvironmentParams{});
    return rep.calibration;
}

// 1 -------------------------------------------------------------------------

Outcome plasticity_math()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> lo(-3.0, 3.0), span(1e-3, 10.0), res(-100.0, 100.0);
    int failures = 0;
    for (int i = 0; i < 10000; ++i) {
        PlasticityParams pp{lo(rng), 0.0, true};
        const double s = span(rng);
        pp.w_max = pp.w_min + s;
        double a = res(rng), b = res(rng);
        if (a > b)
            std::swap(a, b);
        const double wa = resource_to_weight(a, pp), wb = resource_to_weight(b, pp);
        const bool monotone = wa <= wb;
        const bool bounded = wa >= pp.w_min && wb < pp.w_max;
        const bool clamp = resource_to_weight(-std::abs(a), pp) == pp.w_min
                           && resource_to_weight(0.0, pp) == pp.w_min;
        const double half = resource_to_weight(s, pp);
        const bool half_sat = std::abs(half - (pp.w_min + 0.5 * s)) <= 1e-12 * (1.0 + std::abs(half));
        failures += !(monotone && bounded && clamp && half_sat);
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs < 1.0,
            std::to_string(failures) + " failing draws of 10000, " + fmt("%.3f s", secs)};
}

// 2 -------------------------------------------------------------------------

Outcome neuron_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> tau(1.0, 30.0), inc(0.12, 12.0), eq(1.0, 100.0),
        rate(0.05, 3.0), amp(0.05, 1.0);
    int bad_trains = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = NeuronParams::from_equilibrium(tau(rng), inc(rng), eq(rng));
        std::poisson_distribution<int> count(rate(rng));
        const double w = amp(rng);
        std::vector<double> drive(1000);
        for (double& d : drive)
            d = w * count(rng);

        std::vector<double> coarse;
        NeuronState s;
        for (int t = 0; t < 1000; ++t) {
            const auto r = step_neuron(s, p, drive[t], 0.0, t);
            s = r.state;
            if (r.fired)
                coarse.push_back(t);
        }
        const auto fine = oracle::FineNeuron{p.tau_v, p.a, p.t_hat}.spike_times(drive);
        bool ok = std::abs(static_cast<long>(coarse.size()) - static_cast<long>(fine.size())) <= 1;
        for (std::size_t i = 0; i < std::min(coarse.size(), fine.size()); ++i) {
            worst = std::max(worst, std::abs(coarse[i] - fine[i]));
            ok = ok && std::abs(coarse[i] - fine[i]) <= 1.0 + 1e-9;
        }
        bad_trains += !ok;
    }
    const double secs = seconds_since(t0);
    return {bad_trains == 0 && secs < 30.0,
            std::to_string(bad_trains) + " mismatching trains of 100, worst offset "
                + fmt("%.2f ms", worst) + ", " + fmt("%.1f s", secs)};
}

// 4 -------------------------------------------------------------------------

Outcome feedback_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    const EnvironmentParams p;
    std::mt19937_64 rng(404);
    std::normal_distribution<double> step(0.0, 0.008);
    std::vector<double> d(1000000);
    double x = 0.5;
    for (double& v : d) {
        x = std::clamp(x + step(rng), 0.0, 1.5);
        v = x;
    }
    const auto ref = oracle::reference_feedback(d, p.hysteresis, p.zone_radius,
                                                static_cast<int>(p.zone_reward_period));
    RewardState rs{d[0], kNever};
    long mismatches = 0, rewards = 0, punishments = 0;
    for (std::size_t t = 0; t < d.size(); ++t) {
        const auto fb = generate_feedback(rs, d[t], static_cast<double>(t), p);
        mismatches += fb.reward != ref[t].reward || fb.punish != ref[t].punish;
        rewards += fb.reward;
        punishments += fb.punish;
        rs = fb.state;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && rewards > 0 && punishments > 0 && secs < 10.0,
            std::to_string(mismatches) + " mismatching steps of 10^6 (" + std::to_string(rewards)
                + " rewards, " + std::to_string(punishments) + " punishments), "
                + fmt("%.1f s", secs)};
}

// 5 -------------------------------------------------------------------------

Outcome encoder_calibration()
{
    const EnvironmentParams p;
    const CalibrationReport rep = calibrate_encoder(p);
    if (!rep.ok)
        return {false, "calibration failed: " + rep.diagnostic};
    const double rate = measure_encoder_rate(p, rep.calibration, 987654321, 200000);
    return {std::abs(rate - p.target_rate_hz) <= 0.1 * p.target_rate_hz,
            "held-out mean rate " + fmt("%.2f Hz", rate) + " (target "
                + fmt("%.0f Hz", p.target_rate_hz) + ")"};
}

// 6, 3, 7 -------------------------------------------------------------------

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct SeedRuns {
    std::vector<EpisodeResult> results;
    double mean = 0.0;
};

SeedRuns run_seeds(const NetworkConfig& cfg)
{
    SeedRuns out;
    for (auto seed : kSeeds) {
        out.results.push_back(run_episode(cfg, EnvironmentParams{}, calibration(), seed));
        out.mean += out.results.back().criterion / kSeeds.size();
    }
    return out;
}

const SeedRuns& optimum_runs()
{
    static const SeedRuns r = run_seeds(NetworkConfig{});
    return r;
}

std::string per_seed(const SeedRuns& r)
{
    std::string s;
    for (const auto& e : r.results)
        s += (s.empty() ? "" : " ") + fmt("%.3f", e.criterion);
    return "[" + s + "]";
}

Outcome resource_conservation()
{
    double worst = 0.0;
    for (const auto& r : optimum_runs().results)
        for (std::size_t n = 0; n < r.initial_resource_totals.size(); ++n)
            worst = std::max(worst, std::abs(r.final_resource_totals[n] - r.initial_resource_totals[n]));
    return {worst < 1e-9, "max |sum W - sum W0| over 3 runs " + fmt("%.3g", worst)};
}

Outcome end_to_end_learning()
{
    const auto t0 = std::chrono::steady_clock::now();
    const SeedRuns& opt = optimum_runs();
    NetworkConfig frozen;
    frozen.pulse_pos = 0.0;
    const SeedRuns base = run_seeds(frozen);

    const bool a = opt.mean >= 0.5;
    const bool b = opt.mean >= 2.0 * base.mean;
    bool c = true;
    std::string curves;
    for (const auto& r : opt.results) {
        c = c && r.window_curve.back().in_zone_fraction > r.window_curve.front().in_zone_fraction;
        curves += " " + fmt("%.3f", r.window_curve.front().in_zone_fraction) + "->"
                  + fmt("%.3f", r.window_curve.back().in_zone_fraction);
    }
    return {a && b && c,
            std::string("(a) ") + (a ? "ok" : "FAIL") + " mean " + fmt("%.3f", opt.mean) + " "
                + per_seed(opt) + "; (b) " + (b ? "ok" : "FAIL") + " baseline "
                + fmt("%.3f", base.mean) + " " + per_seed(base) + "; (c) " + (c ? "ok" : "FAIL")
                + " first->last window" + curves + "; " + fmt("%.0f s", seconds_since(t0))};
}

Outcome all_to_all()
{
    NetworkConfig cfg;
    cfg.input_connection_share = 1.0;
    const SeedRuns full = run_seeds(cfg);
    const double ref = optimum_runs().mean;
    const double ratio = full.mean > 0.0 ? ref / full.mean : INFINITY;
    return {full.mean < ref, "share 1.0 mean " + fmt("%.3f", full.mean) + " " + per_seed(full)
                                 + " vs 0.77 mean " + fmt("%.3f", ref) + ", ratio "
                                 + fmt("%.2f", ratio) + " (2x gap reported only)"};
}

// 8 -------------------------------------------------------------------------

Outcome ga_smoke()
{
    const auto t0 = std::chrono::steady_clock::now();
    GaConfig cfg;
    cfg.population_size = 12;
    cfg.generations = 5;
    cfg.elitism_fraction = 0.1;
    cfg.rng_seed = 8;
    EvalContext ctx;
    ctx.cal = calibration();
    ctx.episode.train_ms = 100000;
    ctx.episode.eval_ms = 50000;
    ctx.episode.window_ms = 50000;
    ctx.env_seeds = {1000, 1001};
    const GaResult r = run_ga(cfg, ctx);

    bool monotone = true;
    std::string bests;
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        if (i > 0)
            monotone = monotone && r.history[i].best >= r.history[i - 1].best;
        bests += (bests.empty() ? "" : " ") + fmt("%.3f", r.history[i].best);
    }
    const bool ok = r.history.size() == 5 && monotone
                    && r.history.back().best >= r.history.front().best;
    return {ok, "best per generation [" + bests + "], " + fmt("%.0f s", seconds_since(t0))};
}

// 9 -------------------------------------------------------------------------

std::map<std::string, std::string> read_dir(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            files[fs::relative(e.path(), dir).string()] =
                std::string(std::istreambuf_iterator<char>(in), {});
        }
    return files;
}

Outcome determinism(const std::string& cli)
{
    if (cli.empty())
        return {false, "no --cli given"};
    const fs::path root = fs::temp_directory_path() / ("spikerl_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::vector<std::pair<std::string, std::string>> commands{
        {"run", "run --seed 4 --network-seed 9 --train-ms 20000 --eval-ms 5000 --trace"},
        {"evaluate", "evaluate --seed 2 --trials 2 --train-ms 8000 --eval-ms 2000"},
        {"optimize", "optimize --train-ms 2000 --eval-ms 1000 -c \"" + (root / "small.cfg").string() + "\""},
        {"calibrate", "calibrate"},
    };
    // Small GA so the optimize command stays cheap.
    {
        std::ofstream cfg(root / "small.cfg");
        cfg << "ga_population = 4\nga_generations = 2\nga_trials = 1\nneurons_per_group = 3\n";
    }

    std::string detail;
    bool ok = true;
    for (const auto& [name, args] : commands) {
        std::vector<std::map<std::string, std::string>> outs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = root / (name + std::to_string(rep));
            const std::string cmd = "\"" + cli + "\" " + args + " -o \"" + out.string() + "\" > /dev/null";
            if (std::system(cmd.c_str()) != 0) {
                ok = false;
                detail += name + ": command failed; ";
                break;
            }
            outs.push_back(read_dir(out));
        }
        if (outs.size() == 2) {
            const bool same = outs[0] == outs[1] && !outs[0].empty();
            ok = ok && same;
            detail += name + (same ? " identical" : " DIFFERS") + " (" + std::to_string(outs[0].size())
                      + " files); ";
        }
    }
    // Render the run's snapshot twice as well.
    std::vector<std::string> images;
    for (int rep = 0; rep < 2; ++rep) {
        const fs::path out = root / ("render" + std::to_string(rep));
        const std::string cmd = "\"" + cli + "\" render-weights -i \""
                                + (root / "run0" / "weights.txt").string() + "\" -o \"" + out.string()
                                + "\" > /dev/null";
        if (std::system(cmd.c_str()) == 0) {
            const auto files = read_dir(out);
            for (const auto& [_, content] : files)
                images.push_back(content);
        }
    }
    const bool render_same = images.size() >= 2 && images.size() % 2 == 0
                             && std::equal(images.begin(), images.begin() + images.size() / 2,
                                           images.begin() + images.size() / 2);
    ok = ok && render_same;
    detail += std::string("render-weights ") + (render_same ? "identical" : "DIFFERS");
    fs::remove_all(root);
    return {ok, detail};
}

// 10 ------------------------------------------------------------------------

std::string golden_ppm(int width, int height, const std::map<std::pair<int, int>, std::array<int, 3>>& lit)
{
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto it = lit.find({x, y});
            for (int c = 0; c < 3; ++c)
                out.push_back(static_cast<char>(it == lit.end() ? 0 : it->second[c]));
        }
    return out;
}

Outcome weight_image_golden()
{
    constexpr int npg = 2;
    const int width = npg * 21 + 1, height = kGroups * 21 + 1;
    auto blank = [] { return WeightSnapshot::Constant(npg * kGroups, kInputChannels, 2.66); };
    auto channel = [](int row, int col, int kind) { return 3 * (row * kViewPixels + col) + kind; };
    // Tile of learning neuron n: group n / npg is the tile row.
    auto pixel = [](int n, int row, int col) {
        return std::pair<int, int>{(n % npg) * 21 + 1 + col, (n / npg) * 21 + 1 + row};
    };

    int passed = 0, total = 0;
    // Single strong channel of each colour.
    for (int kind = 0; kind < 3; ++kind) {
        WeightSnapshot w = blank();
        const int n = 2 * kind + 1, row = 4 + kind, col = 19 - kind;
        w(n, channel(row, col, kind)) = 55.0;
        std::array<int, 3> rgb{0, 0, 0};
        rgb[kind] = 255;
        ++total;
        passed += encode_ppm(export_weight_image(w, npg)) == golden_ppm(width, height, {{pixel(n, row, col), rgb}});
    }
    // Mixed colours, a threshold tie and an absent synapse.
    {
        WeightSnapshot w = blank();
        w(0, channel(0, 0, 0)) = 31.0;
        w(0, channel(0, 0, 2)) = 31.0;          // magenta
        w(5, channel(10, 10, 1)) = 31.0;
        w(5, channel(10, 10, 2)) = 31.0;        // cyan
        w(7, channel(19, 19, 0)) = 40.0;
        w(7, channel(19, 19, 1)) = 40.0;
        w(7, channel(19, 19, 2)) = 40.0;        // white
        w(6, channel(3, 3, 0)) = 30.0;          // tie stays dark
        w(6, channel(3, 4, 1)) = std::nan("");  // absent stays dark
        ++total;
        passed += encode_ppm(export_weight_image(w, npg))
                  == golden_ppm(width, height, {{pixel(0, 0, 0), {255, 0, 255}},
                                                {pixel(5, 10, 10), {0, 255, 255}},
                                                {pixel(7, 19, 19), {255, 255, 255}}});
    }
    return {passed == total, std::to_string(passed) + "/" + std::to_string(total) + " pixmaps byte-exact"};
}

}  // namespace

int main(int argc, char** argv)
{
    std::string cli;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc)
            cli = argv[++i];
        else if (a == "--only" && i + 1 < argc)
            only.insert(std::atoi(argv[++i]));
        else {
            std::fprintf(stderr, "usage: acceptance [--cli path] [--only N]...\n");
            return 2;
        }
    }

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"plasticity math", plasticity_math},
        {"neuron oracle", neuron_oracle},
        {"resource conservation", resource_conservation},
        {"reward-generator oracle", feedback_oracle},
        {"encoder calibration", encoder_calibration},
        {"end-to-end learning", end_to_end_learning},
        {"all-to-all degradation", all_to_all},
        {"GA smoke test", ga_smoke},
        {"determinism", [&] { return determinism(cli); }},
        {"weight image golden", weight_image_golden},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d %s: %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
