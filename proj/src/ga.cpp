#include "spikerl/ga.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spikerl {

namespace {

// Ranges spanning two decades or more are sampled log-uniformly.
const std::array<GeneSpec, kGeneCount> kGenes{{
    {"neurons_per_group", 1, 100, false, true},
    {"noise_rate_hz", 0.0001, 10, true, false},
    {"w_max_afferent", 0.12, 1.2, false, false},
    {"initial_resource", 0.3, 3, false, false},
    {"input_connection_share", 0.01, 0.8, false, false},
    {"w_input_to_gateinp_inhib", 0.12, 1.2, false, false},
    {"learn_tau_v_ms", 1, 30, false, false},
    {"learn_equilibrium_ms", 1, 100, false, false},
    {"learn_threshold_increment", 0.12, 12, true, false},
    {"plasticity_window_ms", 3, 100, false, false},
    {"gate_tau_v_ms", 1, 30, false, false},
    {"gate_equilibrium_ms", 3, 100, false, false},
    {"gate_threshold_increment", 0.12, 36, true, false},
    {"gateinp_tau_v_ms", 3, 30, false, false},
    {"activating_weight_ms", 3, 300, true, false},
    {"pulse_neg_ratio", 0.3, 30, true, false},
}};

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int tournament(const std::vector<Individual>& pop, std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> pick(0, static_cast<int>(pop.size()) - 1);
    const int a = pick(rng);
    const int b = pick(rng);
    return *pop[b].fitness > *pop[a].fitness ? b : a;
}

}  // namespace

const std::array<GeneSpec, kGeneCount>& gene_table()
{
    return kGenes;
}

int gene_index(const std::string& key)
{
    for (int i = 0; i < kGeneCount; ++i)
        if (key == kGenes[i].key)
            return i;
    return -1;
}

Genome genome_from_config(const NetworkConfig& c)
{
    return {static_cast<double>(c.neurons_per_group), c.noise_rate_hz, c.w_max_afferent,
            c.initial_resource, c.input_connection_share, c.w_input_to_gateinp_inhib,
            c.learn_tau_v_ms, c.learn_equilibrium_ms, c.learn_threshold_increment,
            c.plasticity_window_ms, c.gate_tau_v_ms, c.gate_equilibrium_ms,
            c.gate_threshold_increment, c.gateinp_tau_v_ms, c.activating_weight_ms,
            c.pulse_neg_ratio};
}

NetworkConfig config_from_genome(const Genome& g, NetworkConfig c)
{
    c.neurons_per_group = static_cast<int>(std::lround(g[0]));
    c.noise_rate_hz = g[1];
    c.w_max_afferent = g[2];
    c.initial_resource = g[3];
    c.input_connection_share = g[4];
    c.w_input_to_gateinp_inhib = g[5];
    c.learn_tau_v_ms = g[6];
    c.learn_equilibrium_ms = g[7];
    c.learn_threshold_increment = g[8];
    c.plasticity_window_ms = g[9];
    c.gate_tau_v_ms = g[10];
    c.gate_equilibrium_ms = g[11];
    c.gate_threshold_increment = g[12];
    c.gateinp_tau_v_ms = g[13];
    c.activating_weight_ms = g[14];
    c.pulse_neg_ratio = g[15];
    return c;
}

bool genome_in_range(const Genome& g)
{
    for (int i = 0; i < kGeneCount; ++i) {
        const GeneSpec& s = kGenes[i];
        if (!(g[i] >= s.lo && g[i] <= s.hi))
            return false;
        if (s.integer && g[i] != std::round(g[i]))
            return false;
    }
    return true;
}

double sample_gene(int index, std::mt19937_64& rng)
{
    const GeneSpec& s = kGenes.at(index);
    if (s.integer)
        return std::uniform_int_distribution<int>(static_cast<int>(s.lo),
                                                  static_cast<int>(s.hi))(rng);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double v = s.log_scale ? s.lo * std::pow(s.hi / s.lo, u) : s.lo + (s.hi - s.lo) * u;
    return std::clamp(v, s.lo, s.hi);
}

Genome random_genome(std::mt19937_64& rng)
{
    Genome g{};
    for (int i = 0; i < kGeneCount; ++i)
        g[i] = sample_gene(i, rng);
    return g;
}

int GaConfig::elite_count() const
{
    return static_cast<int>(std::ceil(elitism_fraction * population_size - 1e-9));
}

void GaConfig::validate() const
{
    if (population_size < 2)
        throw std::invalid_argument("ga: population_size must be >= 2");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0))
        throw std::invalid_argument("ga: mutation_prob must be in [0, 1]");
    if (!(elitism_fraction >= 0.0 && elitism_fraction < 1.0))
        throw std::invalid_argument("ga: elitism_fraction must be in [0, 1)");
    if (trials_per_genome < 1)
        throw std::invalid_argument("ga: trials_per_genome must be >= 1");
    if (generations < 1)
        throw std::invalid_argument("ga: generations must be >= 1");
    if (parallelism < 1)
        throw std::invalid_argument("ga: parallelism must be >= 1");
}

Evaluation evaluate(const Genome& g, const EvalContext& ctx)
{
    Evaluation ev;
    if (ctx.env_seeds.empty()) {
        ev.diagnostic = "no evaluation seeds";
        return ev;
    }
    try {
        if (!genome_in_range(g))
            throw std::invalid_argument("genome outside the parameter ranges");
        const NetworkConfig cfg = config_from_genome(g, ctx.base);
        double sum = 0.0;
        for (std::uint64_t seed : ctx.env_seeds) {
            const double c = run_episode(cfg, ctx.env, ctx.cal, seed, ctx.episode).criterion;
            ev.criteria.push_back(c);
            sum += c;
        }
        ev.fitness = sum / static_cast<double>(ctx.env_seeds.size());
    } catch (const std::exception& e) {
        ev.fitness = 0.0;
        ev.criteria.clear();
        ev.diagnostic = e.what();
    }
    return ev;
}

std::vector<Individual> evolve(const std::vector<Individual>& pop, const GaConfig& cfg,
                               std::mt19937_64& rng)
{
    cfg.validate();
    if (pop.empty())
        throw std::invalid_argument("evolve: empty population");
    for (const auto& ind : pop)
        if (!ind.fitness)
            throw std::invalid_argument("evolve: population is not fully evaluated");

    std::vector<int> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return *pop[a].fitness > *pop[b].fitness; });

    const int n = cfg.population_size;
    const int n_elite = std::min(cfg.elite_count(), static_cast<int>(pop.size()));
    std::vector<Individual> next;
    next.reserve(n);
    for (int i = 0; i < n_elite && static_cast<int>(next.size()) < n; ++i)
        next.push_back(pop[order[i]]);

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> which_gene(0, kGeneCount - 1);
    while (static_cast<int>(next.size()) < n) {
        const Genome& a = pop[tournament(pop, rng)].genome;
        const Genome& b = pop[tournament(pop, rng)].genome;
        Individual child;
        for (int i = 0; i < kGeneCount; ++i)
            child.genome[i] = coin(rng) < 0.5 ? a[i] : b[i];
        if (coin(rng) < cfg.mutation_prob) {
            const int i = which_gene(rng);
            child.genome[i] = sample_gene(i, rng);
        }
        next.push_back(child);
    }
    return next;
}

void evaluate_population(std::vector<Individual>& pop, const EvalContext& ctx, int parallelism,
                         const std::function<void(int, const std::string&)>& on_error)
{
    std::vector<int> todo;
    for (int i = 0; i < static_cast<int>(pop.size()); ++i)
        if (!pop[i].fitness)
            todo.push_back(i);
    std::vector<Evaluation> results(todo.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < todo.size(); k = next++)
            results[k] = evaluate(pop[todo[k]].genome, ctx);
    };
    const int n_threads = std::clamp(parallelism, 1, std::max(1, static_cast<int>(todo.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < n_threads; ++i)
            threads.emplace_back(worker);
        for (auto& th : threads)
            th.join();
    }

    for (std::size_t k = 0; k < todo.size(); ++k) {
        pop[todo[k]].fitness = results[k].fitness;
        if (!results[k].diagnostic.empty() && on_error)
            on_error(todo[k], results[k].diagnostic);
    }
}

GenerationStats summarize(int generation, const std::vector<Individual>& pop)
{
    GenerationStats s;
    s.generation = generation;
    if (pop.empty())
        return s;
    int best = 0;
    double sum = 0.0;
    for (int i = 0; i < static_cast<int>(pop.size()); ++i) {
        sum += pop[i].fitness.value_or(0.0);
        if (pop[i].fitness.value_or(0.0) > pop[best].fitness.value_or(0.0))
            best = i;
    }
    s.best = pop[best].fitness.value_or(0.0);
    s.mean = sum / static_cast<double>(pop.size());
    s.best_genome = pop[best].genome;
    return s;
}

std::string serialize_checkpoint(const GaCheckpoint& cp)
{
    std::string out = "spikerl-ga-checkpoint 1\n";
    out += "generation " + std::to_string(cp.generation) + "\n";
    out += "rng " + cp.rng_state + "\n";
    for (const auto& ind : cp.population) {
        out += "genome " + (ind.fitness ? fmt_double(*ind.fitness) : std::string("-"));
        for (double v : ind.genome)
            out += " " + fmt_double(v);
        out += "\n";
    }
    return out;
}

GaCheckpoint parse_checkpoint(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    auto fail = [](const std::string& what) {
        throw std::runtime_error("ga checkpoint: " + what);
    };
    if (!std::getline(in, line) || line != "spikerl-ga-checkpoint 1")
        fail("bad header");

    GaCheckpoint cp;
    if (!std::getline(in, line) || line.rfind("generation ", 0) != 0)
        fail("missing generation line");
    try {
        cp.generation = std::stoi(line.substr(11));
    } catch (const std::exception&) {
        fail("bad generation line");
    }
    if (!std::getline(in, line) || line.rfind("rng ", 0) != 0)
        fail("missing rng line");
    cp.rng_state = line.substr(4);
    {
        std::mt19937_64 probe;
        std::istringstream rs(cp.rng_state);
        if (!(rs >> probe))
            fail("bad rng state");
    }

    int lineno = 3;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string tag, fit;
        ls >> tag >> fit;
        if (tag != "genome")
            fail("line " + std::to_string(lineno) + ": expected a genome");
        Individual ind;
        try {
            if (fit != "-")
                ind.fitness = std::stod(fit);
            for (double& v : ind.genome) {
                std::string tok;
                if (!(ls >> tok))
                    throw std::runtime_error("short");
                v = std::stod(tok);
            }
        } catch (const std::exception&) {
            fail("line " + std::to_string(lineno) + ": malformed genome");
        }
        std::string extra;
        if (ls >> extra)
            fail("line " + std::to_string(lineno) + ": too many values");
        cp.population.push_back(ind);
    }
    if (cp.population.empty())
        fail("no genomes");
    return cp;
}

GaResult run_ga(const GaConfig& cfg, const EvalContext& ctx,
                const std::function<void(const GenerationStats&, const GaCheckpoint&)>& on_generation,
                const std::optional<GaCheckpoint>& resume,
                const std::function<void(int, const std::string&)>& on_error)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.rng_seed);
    std::vector<Individual> pop;
    int gen = 0;
    GaResult result;

    if (resume) {
        std::istringstream rs(resume->rng_state);
        rs >> rng;
        pop = resume->population;
        gen = resume->generation;
        evaluate_population(pop, ctx, cfg.parallelism, on_error);
    } else {
        pop.resize(cfg.population_size);
        for (auto& ind : pop)
            ind.genome = random_genome(rng);
        evaluate_population(pop, ctx, cfg.parallelism, on_error);
    }

    auto checkpoint = [&] {
        GaCheckpoint cp;
        cp.generation = gen;
        std::ostringstream rs;
        rs << rng;
        cp.rng_state = rs.str();
        cp.population = pop;
        return cp;
    };

    // A resumed generation was already reported before the checkpoint was written.
    bool report = !resume;
    result.last = checkpoint();
    for (;;) {
        if (report) {
            const GenerationStats stats = summarize(gen, pop);
            result.history.push_back(stats);
            result.last = checkpoint();
            if (on_generation)
                on_generation(stats, result.last);
        }
        report = true;
        if (gen + 1 >= cfg.generations)
            break;
        pop = evolve(pop, cfg, rng);
        ++gen;
        evaluate_population(pop, ctx, cfg.parallelism, on_error);
    }

    const auto best = std::max_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
        return a.fitness.value_or(0.0) < b.fitness.value_or(0.0);
    });
    result.best = *best;
    return result;
}

std::string ga_log_header()
{
    std::string out = "generation,best_fitness,mean_fitness";
    for (const auto& g : kGenes)
        out += std::string(",") + g.key;
    return out + "\n";
}

std::string ga_log_row(const GenerationStats& s)
{
    std::string out = std::to_string(s.generation) + "," + fmt_double(s.best) + ","
                      + fmt_double(s.mean);
    for (double v : s.best_genome)
        out += "," + fmt_double(v);
    return out + "\n";
}

}  // namespace spikerl
