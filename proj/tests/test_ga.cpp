#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "spikerl/ga.hpp"

using namespace spikerl;

namespace {

EvalContext tiny_context()
{
    EvalContext ctx;
    static const CalibrationReport rep = calibrate_encoder(EnvironmentParams{});
    ctx.cal = rep.calibration;
    ctx.episode.train_ms = 1500;
    ctx.episode.eval_ms = 500;
    ctx.episode.window_ms = 500;
    ctx.env_seeds = {11, 12};
    return ctx;
}

std::vector<Individual> scored_population(int n, std::mt19937_64& rng)
{
    std::vector<Individual> pop(n);
    std::uniform_real_distribution<double> f(0.0, 1.0);
    for (auto& ind : pop) {
        ind.genome = random_genome(rng);
        ind.fitness = f(rng);
    }
    return pop;
}

}  // namespace

TEST(Genes, TableMatchesConfigOrder)
{
    const NetworkConfig cfg;
    const Genome g = genome_from_config(cfg);
    EXPECT_TRUE(genome_in_range(g));
    EXPECT_EQ(config_from_genome(g), cfg);
    EXPECT_EQ(gene_index("plasticity_window_ms"), 9);
    EXPECT_EQ(gene_index("nope"), -1);
    EXPECT_EQ(gene_table()[0].lo, 1);
    EXPECT_EQ(gene_table()[0].hi, 100);
}

TEST(Genes, ConfigMappingKeepsStructuralFields)
{
    NetworkConfig base;
    base.noise_path = false;
    base.rng_seed = 99;
    std::mt19937_64 rng(1);
    const NetworkConfig cfg = config_from_genome(random_genome(rng), base);
    EXPECT_FALSE(cfg.noise_path);
    EXPECT_EQ(cfg.rng_seed, 99u);
}

TEST(Genes, RandomGenomesRespectRanges)
{
    std::mt19937_64 rng(5);
    std::set<int> npg;
    for (int i = 0; i < 10000; ++i) {
        const Genome g = random_genome(rng);
        ASSERT_TRUE(genome_in_range(g));
        npg.insert(static_cast<int>(g[0]));
    }
    EXPECT_EQ(*npg.begin(), 1);
    EXPECT_EQ(*npg.rbegin(), 100);
}

TEST(Genes, LogUniformNoiseMedian)
{
    std::mt19937_64 rng(8);
    std::vector<double> v;
    for (int i = 0; i < 10000; ++i)
        v.push_back(sample_gene(1, rng));
    std::nth_element(v.begin(), v.begin() + 5000, v.end());
    EXPECT_NEAR(v[5000], std::sqrt(0.0001 * 10.0), 0.2 * std::sqrt(0.001));
}

TEST(Genes, LogScaleFlags)
{
    std::set<std::string> logs;
    for (const auto& g : gene_table())
        if (g.log_scale)
            logs.insert(g.key);
    EXPECT_EQ(logs, (std::set<std::string>{"noise_rate_hz", "learn_threshold_increment",
                                            "gate_threshold_increment", "activating_weight_ms",
                                            "pulse_neg_ratio"}));
}

TEST(GaConfig, EliteCountAndValidation)
{
    GaConfig cfg;
    EXPECT_EQ(cfg.elite_count(), 30);
    cfg.population_size = 12;
    EXPECT_EQ(cfg.elite_count(), 2);
    cfg.elitism_fraction = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = GaConfig{};
    cfg.trials_per_genome = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Evolve, ElitesCarriedVerbatim)
{
    std::mt19937_64 rng(3);
    GaConfig cfg;
    const auto pop = scored_population(300, rng);
    const auto next = evolve(pop, cfg, rng);
    ASSERT_EQ(next.size(), 300u);
    std::vector<double> fit;
    for (const auto& i : pop)
        fit.push_back(*i.fitness);
    std::sort(fit.rbegin(), fit.rend());
    for (int i = 0; i < 30; ++i) {
        ASSERT_TRUE(next[i].fitness.has_value());
        EXPECT_EQ(*next[i].fitness, fit[i]);
    }
    for (std::size_t i = 30; i < next.size(); ++i) {
        EXPECT_FALSE(next[i].fitness.has_value());
        EXPECT_TRUE(genome_in_range(next[i].genome));
    }
}

TEST(Evolve, IdenticalParentsWithoutMutation)
{
    std::mt19937_64 rng(4);
    GaConfig cfg;
    cfg.population_size = 20;
    cfg.mutation_prob = 0.0;
    std::vector<Individual> pop(20);
    const Genome g = random_genome(rng);
    for (auto& i : pop) {
        i.genome = g;
        i.fitness = 0.3;
    }
    for (const auto& child : evolve(pop, cfg, rng))
        EXPECT_EQ(child.genome, g);
}

TEST(Evolve, ChildrenMixParentGenes)
{
    std::mt19937_64 rng(6);
    GaConfig cfg;
    cfg.population_size = 50;
    cfg.mutation_prob = 0.0;
    const auto pop = scored_population(50, rng);
    for (const auto& child : evolve(pop, cfg, rng))
        for (int k = 0; k < kGeneCount; ++k) {
            const bool found = std::any_of(pop.begin(), pop.end(),
                                           [&](const auto& p) { return p.genome[k] == child.genome[k]; });
            EXPECT_TRUE(found);
        }
}

TEST(Evolve, RequiresEvaluatedPopulation)
{
    std::mt19937_64 rng(1);
    std::vector<Individual> pop(4);
    EXPECT_THROW(evolve(pop, GaConfig{}, rng), std::invalid_argument);
}

TEST(Evaluate, SingleTrialEqualsEpisode)
{
    EvalContext ctx = tiny_context();
    ctx.env_seeds = {11};
    const Genome g = genome_from_config(NetworkConfig{});
    const Evaluation ev = evaluate(g, ctx);
    const double c = run_episode(NetworkConfig{}, ctx.env, ctx.cal, 11, ctx.episode).criterion;
    EXPECT_EQ(ev.fitness, c);
    EXPECT_TRUE(ev.diagnostic.empty());
    EXPECT_EQ(evaluate(g, ctx).fitness, ev.fitness);
}

TEST(Evaluate, InvalidGenomeScoresZero)
{
    Genome g = genome_from_config(NetworkConfig{});
    g[9] = 500.0;
    const Evaluation ev = evaluate(g, tiny_context());
    EXPECT_EQ(ev.fitness, 0.0);
    EXPECT_FALSE(ev.diagnostic.empty());
}

TEST(Evaluate, ParallelMatchesSerial)
{
    std::mt19937_64 rng(2);
    std::vector<Individual> a(6);
    for (auto& i : a)
        i.genome = random_genome(rng);
    for (auto& i : a)
        i.genome[0] = 2;  // keep these runs cheap
    auto b = a;
    const EvalContext ctx = tiny_context();
    evaluate_population(a, ctx, 1);
    evaluate_population(b, ctx, 3);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(*a[i].fitness, *b[i].fitness);
}

TEST(Checkpoint, RoundTrip)
{
    std::mt19937_64 rng(9);
    GaCheckpoint cp;
    cp.generation = 4;
    rng.discard(17);
    std::ostringstream rs;
    rs << rng;
    cp.rng_state = rs.str();
    cp.population = scored_population(5, rng);
    cp.population[2].fitness.reset();
    const GaCheckpoint back = parse_checkpoint(serialize_checkpoint(cp));
    EXPECT_EQ(back.generation, 4);
    EXPECT_EQ(back.rng_state, cp.rng_state);
    ASSERT_EQ(back.population.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(back.population[i].genome, cp.population[i].genome);
        EXPECT_EQ(back.population[i].fitness, cp.population[i].fitness);
    }
    EXPECT_THROW(parse_checkpoint("garbage"), std::runtime_error);
    EXPECT_THROW(parse_checkpoint("spikerl-ga-checkpoint 1\ngeneration 1\nrng 1 2\n"),
                 std::runtime_error);
}

TEST(RunGa, SmallRunIsMonotoneAndResumable)
{
    GaConfig cfg;
    cfg.population_size = 6;
    cfg.generations = 3;
    cfg.rng_seed = 4;
    EvalContext ctx = tiny_context();
    ctx.base.neurons_per_group = 2;

    std::vector<GaCheckpoint> cps;
    const GaResult full = run_ga(cfg, ctx, [&](const GenerationStats&, const GaCheckpoint& cp) {
        cps.push_back(cp);
    });
    ASSERT_EQ(full.history.size(), 3u);
    for (std::size_t i = 1; i < full.history.size(); ++i)
        EXPECT_GE(full.history[i].best, full.history[i - 1].best);
    EXPECT_EQ(*full.best.fitness, full.history.back().best);

    const GaCheckpoint cp = parse_checkpoint(serialize_checkpoint(cps[0]));
    const GaResult resumed = run_ga(cfg, ctx, {}, cp);
    ASSERT_EQ(resumed.history.size(), 2u);
    EXPECT_EQ(resumed.history.back().best, full.history.back().best);
    EXPECT_EQ(resumed.history.back().best_genome, full.history.back().best_genome);
    EXPECT_EQ(ga_log_row(resumed.history.back()), ga_log_row(full.history.back()));
}

TEST(RunGa, LogFormat)
{
    const std::string head = ga_log_header();
    EXPECT_EQ(head.rfind("generation,best_fitness,mean_fitness,neurons_per_group,", 0), 0u);
    EXPECT_EQ(std::count(head.begin(), head.end(), ','), 2 + kGeneCount);
}
