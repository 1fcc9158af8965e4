#pragma once

// Genetic search over the 16 tunable network parameters.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spikerl/environment.hpp"
#include "spikerl/experiment.hpp"
#include "spikerl/network.hpp"

namespace spikerl {

inline constexpr int kGeneCount = 16;

struct GeneSpec {
    const char* key;  ///< same name as the config-file key
    double lo;
    double hi;
    bool log_scale;
    bool integer;
};

/// Gene order matches the NetworkConfig field order.
const std::array<GeneSpec, kGeneCount>& gene_table();
/// Index of a gene by key, or -1.
int gene_index(const std::string& key);

using Genome = std::array<double, kGeneCount>;

Genome genome_from_config(const NetworkConfig& cfg);
/// Copies the genes onto `base`, leaving structural fields alone.
NetworkConfig config_from_genome(const Genome& g, NetworkConfig base = {});
bool genome_in_range(const Genome& g);

double sample_gene(int index, std::mt19937_64& rng);
Genome random_genome(std::mt19937_64& rng);

struct GaConfig {
    int population_size = 300;
    double mutation_prob = 0.5;      ///< per individual
    double elitism_fraction = 0.1;
    int trials_per_genome = 3;
    int generations = 20;
    std::uint64_t rng_seed = 1;
    int parallelism = 1;

    int elite_count() const;
    void validate() const;
    bool operator==(const GaConfig&) const = default;
};

/// What a fitness evaluation needs besides the genome.
struct EvalContext {
    NetworkConfig base;  ///< structural fields and the network seed
    EnvironmentParams env;
    EncoderCalibration cal;
    EpisodeOptions episode;
    std::vector<std::uint64_t> env_seeds;  ///< one episode per seed
};

struct Evaluation {
    double fitness = 0.0;
    std::vector<double> criteria;
    std::string diagnostic;  ///< non-empty when the genome could not be run
};

/// Mean criterion over ctx.env_seeds. Invalid genomes score 0.
Evaluation evaluate(const Genome& g, const EvalContext& ctx);

struct Individual {
    Genome genome{};
    std::optional<double> fitness;
};

/// Next generation: the elites first (fitness kept), then children
/// (fitness unset). Every input individual must be evaluated.
std::vector<Individual> evolve(const std::vector<Individual>& pop, const GaConfig& cfg,
                               std::mt19937_64& rng);

/// Evaluates every individual without a fitness, up to `parallelism` at a time.
/// Results land by index. `on_error` sees (index, diagnostic).
void evaluate_population(std::vector<Individual>& pop, const EvalContext& ctx, int parallelism,
                         const std::function<void(int, const std::string&)>& on_error = {});

struct GenerationStats {
    int generation = 0;
    double best = 0.0;
    double mean = 0.0;
    Genome best_genome{};
};

GenerationStats summarize(int generation, const std::vector<Individual>& pop);

/// Resumable search state, written after each evaluated generation.
struct GaCheckpoint {
    int generation = 0;  ///< index of the evaluated generation in `population`
    std::string rng_state;
    std::vector<Individual> population;
};

std::string serialize_checkpoint(const GaCheckpoint& cp);
/// Throws std::runtime_error on malformed text.
GaCheckpoint parse_checkpoint(const std::string& text);

struct GaResult {
    std::vector<GenerationStats> history;
    Individual best;
    GaCheckpoint last;
};

/// Runs cfg.generations generations (counting generation 0). With `resume`
/// the search continues from the checkpoint instead of a random population.
GaResult run_ga(const GaConfig& cfg, const EvalContext& ctx,
                const std::function<void(const GenerationStats&, const GaCheckpoint&)>& on_generation = {},
                const std::optional<GaCheckpoint>& resume = std::nullopt,
                const std::function<void(int, const std::string&)>& on_error = {});

std::string ga_log_header();
std::string ga_log_row(const GenerationStats& s);

}  // namespace spikerl
