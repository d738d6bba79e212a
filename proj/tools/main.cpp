// phident: batch experiments for structure-preserving identification of
// linear port-Hamiltonian systems.
//
// Subcommands
//   synth      generate a random reference system and a synthetic dataset
//   msd        generate the mass-spring-damper chain dataset
//   identify   fit a system to a dataset by structured gradient descent
//   simulate   integrate a stored system under an input signal
//   gradcheck  verify adjoint gradients against finite differences
//
// Exit codes: 0 clean run, 2 usage error, 3 parse or I/O error, 4 numerical
// failure.  The environment variable PHIDENT_SEED, when set, overrides
// --seed for every subcommand.

#include "phident/generators.hpp"
#include "phident/io.hpp"
#include "phident/optimizer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace phident;
using Md = Mat<double>;

namespace {

constexpr std::uint64_t kNoiseSeedSalt = 0x9e3779b97f4a7c15ull;

struct CommonOpts {
    std::string out_dir;
    std::uint64_t seed = 0;
    double dt = 1e-3;
    double horizon = 1.0;
    bool force = false;
};

void add_data_options(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--out-dir", opts.out_dir, "Output directory")->required();
    cmd->add_option("--seed", opts.seed, "Random seed")->capture_default_str();
    cmd->add_option("--dt", opts.dt, "Time step")->capture_default_str();
    cmd->add_option("--horizon", opts.horizon, "Final time T");
    cmd->add_flag("--force", opts.force, "Overwrite existing outputs");
}

// Create out_dir if needed; refuse to clobber previous outputs unless --force.
void prepare_out_dir(const fs::path& dir, bool force, const std::vector<std::string>& outputs) {
    fs::create_directories(dir);
    if (force) return;
    for (const auto& name : outputs)
        if (fs::exists(dir / name))
            throw ParameterError("refusing to overwrite " + (dir / name).string() +
                                 " (pass --force to replace it)");
}

void write_bundle(const fs::path& dir, const PhSystem<double>& sys, const Signal<double>& u,
                  const Signal<double>& y_clean, double sigma, std::uint64_t seed,
                  const std::string& generator) {
    Signal<double> y_data = add_noise(y_clean, NoiseSpec<double>{sigma, seed ^ kNoiseSeedSalt});
    io::DatasetMeta meta;
    meta.horizon = u.grid.T;
    meta.dt = u.grid.dt;
    meta.m = u.dim();
    meta.sigma = sigma;
    meta.seed = seed;
    meta.generator = generator;
    io::write_dataset(dir, u, y_data, meta, &sys);
    std::printf("wrote dataset %s (n=%lld, m=%lld, %lld nodes)\n", dir.string().c_str(),
                static_cast<long long>(sys.n()), static_cast<long long>(sys.m()),
                static_cast<long long>(u.grid.nodes()));
}

int cmd_synth(const CommonOpts& opts, Index n, Index m, Index r, double sigma) {
    prepare_out_dir(opts.out_dir, opts.force, {"u.csv", "y_data.csv", "meta.json", "system"});
    if (r == 0) r = default_rank(n);
    PhSystem<double> sys = gen_random_phs<double>(n, m, r, opts.seed);
    TimeGrid<double> grid(opts.horizon, opts.dt);
    Signal<double> u = standard_input(grid, m);
    write_bundle(opts.out_dir, sys, u, make_dataset(sys, u), sigma, opts.seed, "random");
    return 0;
}

int cmd_msd(const CommonOpts& opts, const MsdParams<double>& params, double sigma) {
    prepare_out_dir(opts.out_dir, opts.force, {"u.csv", "y_data.csv", "meta.json", "system"});
    PhSystem<double> sys = msd_chain(params);
    TimeGrid<double> grid(opts.horizon, opts.dt);
    Signal<double> u = standard_input(grid, 2);
    char generator[128];
    std::snprintf(generator, sizeof generator, "msd(cells=%lld,mass=%g,damping=%g,stiffness=%g)",
                  static_cast<long long>(params.cells), params.mass, params.damping,
                  params.stiffness);
    write_bundle(opts.out_dir, sys, u, make_dataset(sys, u), sigma, opts.seed, generator);
    return 0;
}

struct IdentifyOpts {
    std::string data_dir;
    std::string init = "default";
    Index n = 0;
    Index rank = 0;
    std::uint64_t guess_seed = 0;
    bool guess_seed_given = false;
    std::string q_mode = "retraction";
    OptimizerConfig<double> cfg;
};

int cmd_identify(const CommonOpts& opts, const IdentifyOpts& id) {
    io::Dataset ds = io::read_dataset(id.data_dir);

    OptimizerConfig<double> cfg = id.cfg;
    if (id.q_mode == "retraction")
        cfg.q_update_mode = QUpdateMode::retraction;
    else if (id.q_mode == "flat")
        cfg.q_update_mode = QUpdateMode::flat_symmetrize;
    else
        throw ParameterError("--q-mode must be 'retraction' or 'flat'");
    cfg.validate();

    std::optional<PhSystem<double>> initial;
    if (id.init == "default") {
        Index n = id.n;
        if (n == 0 && ds.reference.has_value()) n = ds.reference->n();
        if (n == 0)
            throw ParameterError(
                "--n is required when the dataset carries no reference system");
        const Index r = id.rank > 0 ? id.rank : default_rank(n);
        const std::uint64_t seed = id.guess_seed_given ? id.guess_seed : opts.seed;
        initial.emplace(default_initial_guess<double>(n, ds.meta.m, r, seed));
    } else {
        initial.emplace(io::read_system(id.init));
    }

    prepare_out_dir(opts.out_dir, opts.force,
                    {"system", "report.csv", "summary.json", "y_model.csv", "y_diff.csv"});
    const PhSystem<double>* w_ref = ds.reference.has_value() ? &*ds.reference : nullptr;
    IdentifyResult<double> res = identify(*initial, ds.u, ds.y_data, cfg, w_ref);

    const fs::path out(opts.out_dir);
    io::write_system(out / "system", res.system);
    io::write_report_csv(out / "report.csv", res.report);
    io::write_summary_json(out / "summary.json", res.report);
    Signal<double> y_model = simulate(res.system, ds.u).y;
    io::write_signal(out / "y_model.csv", y_model);
    io::write_signal(out / "y_diff.csv",
                     Signal<double>(y_model.grid, Md(y_model.samples - ds.y_data.samples)));

    std::printf("identify: %s after %d iterations, cost %.6e -> %.6e (ratio %.6e)\n",
                res.report.termination_reason.c_str(), res.report.iterations(),
                res.report.initial_cost(), res.report.final_cost(), res.report.ratio());
    return 0;
}

int cmd_simulate(const CommonOpts& opts, const std::string& system_dir,
                 const std::string& input_path) {
    PhSystem<double> sys = io::read_system(system_dir);
    std::optional<Signal<double>> u;
    if (!input_path.empty()) {
        u.emplace(io::read_signal(input_path));
    } else {
        TimeGrid<double> grid(opts.horizon, opts.dt);
        u.emplace(standard_input(grid, sys.m()));
    }
    prepare_out_dir(opts.out_dir, opts.force, {"x.csv", "y.csv"});
    Trajectory<double> traj = simulate(sys, *u);
    const fs::path out(opts.out_dir);
    io::write_signal(out / "x.csv", Signal<double>(traj.grid, traj.x));
    io::write_signal(out / "y.csv", traj.y);
    std::printf("simulated %lld steps of an n=%lld system\n",
                static_cast<long long>(traj.grid.steps), static_cast<long long>(sys.n()));
    return 0;
}

int cmd_gradcheck(const CommonOpts& opts, Index n, Index m, Index r, double h) {
    if (n < 1 || n > 10)
        throw ParameterError("gradcheck: n must lie in [1, 10]; larger systems make the "
                             "finite-difference oracle too expensive to be meaningful");
    if (!(h > 0)) throw ParameterError("gradcheck: h must be positive");
    if (h >= 1e-2)
        std::printf("warning: h = %g is large; finite-difference truncation error will "
                    "dominate the comparison\n",
                    h);
    if (r == 0) r = default_rank(n);

    PhSystem<double> ref = gen_random_phs<double>(n, m, r, opts.seed);
    PhSystem<double> probe = default_initial_guess<double>(n, m, r, opts.seed + 1);
    TimeGrid<double> grid(opts.horizon, opts.dt);
    Signal<double> u = standard_input(grid, m);
    Signal<double> y_data(grid, simulate(ref, u).y.samples);

    Trajectory<double> traj = simulate(probe, u);
    GradientBundle<double> bundle = assemble_gradient(
        probe, traj, solve_adjoint(probe, traj.y, y_data), u, y_data);

    struct Row {
        const char* name;
        ControlBlock block;
        bool geodesic;
    };
    const Row rows[] = {{"J", ControlBlock::J, false},   {"R", ControlBlock::R, false},
                        {"Q", ControlBlock::Q, false},   {"Q_geo", ControlBlock::Q, true},
                        {"B", ControlBlock::B, false},   {"x0", ControlBlock::X0, false}};

    Rng rng(opts.seed + 2);
    bool failed = false;
    std::printf("%-6s %s\n", "block", "max_rel_error");
    for (const Row& row : rows) {
        double max_rel = 0.0;
        bool advisory = false;
        for (int probe_idx = 0; probe_idx < 2; ++probe_idx) {
            Perturbation<double> pert;
            pert.block = row.block;
            pert.q_geodesic = row.geodesic;
            switch (row.block) {
                case ControlBlock::J:
                    pert.dir = project_skew(random_uniform_matrix<double>(n, n, rng));
                    break;
                case ControlBlock::R:
                    pert.dir = random_uniform_matrix<double>(n, r, rng);
                    break;
                case ControlBlock::Q:
                    pert.dir = project_sym(random_uniform_matrix<double>(n, n, rng));
                    break;
                case ControlBlock::B:
                    pert.dir = random_uniform_matrix<double>(n, m, rng);
                    break;
                case ControlBlock::X0:
                    pert.dir = random_uniform_matrix<double>(n, 1, rng);
                    break;
            }
            double analytic = 0.0;
            switch (row.block) {
                case ControlBlock::J:
                    analytic = bundle.g_j.cwiseProduct(pert.dir).sum();
                    break;
                case ControlBlock::R:
                    analytic = factor_gradient(bundle.g_r, probe.G.factor())
                                   .cwiseProduct(pert.dir)
                                   .sum();
                    break;
                case ControlBlock::Q:
                    analytic = bundle.g_q.cwiseProduct(pert.dir).sum();
                    break;
                case ControlBlock::B:
                    analytic = bundle.g_b.cwiseProduct(pert.dir).sum();
                    break;
                case ControlBlock::X0:
                    analytic = bundle.g_x0.dot(Vec<double>(pert.dir.col(0)));
                    break;
            }
            try {
                const double fd = fd_gradient(probe, u, y_data, pert, h);
                max_rel = std::max(max_rel,
                                   std::abs(fd - analytic) /
                                       std::max(std::abs(analytic), 1e-12));
            } catch (const DefinitenessError&) {
                advisory = true;
            }
        }
        if (advisory)
            std::printf("%-6s probe lost positive definiteness at h = %g; reduce h\n",
                        row.name, h);
        else
            std::printf("%-6s %.3e\n", row.name, max_rel);
        if (max_rel > 1e-3) failed = true;
    }
    if (failed) {
        std::printf("gradcheck FAILED: a block exceeded 1e-3\n");
        throw NumericalError("gradcheck: finite-difference mismatch");
    }
    std::printf("gradcheck OK\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structure-preserving identification of port-Hamiltonian systems"};
    app.require_subcommand(1);

    CommonOpts synth_opts, msd_opts, id_opts_common, sim_opts, gc_opts;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a random synthetic dataset");
    Index synth_n = 20, synth_m = 2, synth_r = 0;
    double synth_sigma = 0.0;
    synth->add_option("--n", synth_n, "State dimension")->capture_default_str();
    synth->add_option("--m", synth_m, "Input/output channels")->capture_default_str();
    synth->add_option("--rank", synth_r, "Dissipation factor rank (0 = n/10 rule)");
    synth->add_option("--sigma", synth_sigma, "Gaussian noise level")->capture_default_str();
    add_data_options(synth, synth_opts);

    // msd
    auto* msd = app.add_subcommand("msd", "Generate the mass-spring-damper chain dataset");
    MsdParams<double> msd_params;
    double msd_sigma = 0.0;
    msd->add_option("--cells", msd_params.cells, "Number of chain cells")->capture_default_str();
    msd->add_option("--mass", msd_params.mass, "Cell mass")->capture_default_str();
    msd->add_option("--damping", msd_params.damping, "Cell damping")->capture_default_str();
    msd->add_option("--stiffness", msd_params.stiffness, "Spring stiffness")
        ->capture_default_str();
    msd->add_option("--sigma", msd_sigma, "Gaussian noise level")->capture_default_str();
    add_data_options(msd, msd_opts);

    // identify
    auto* ident = app.add_subcommand("identify", "Fit a system to a dataset");
    IdentifyOpts id;
    ident->add_option("--data", id.data_dir, "Dataset directory")->required();
    ident->add_option("--init", id.init, "'default' or a system directory to start from")
        ->capture_default_str();
    ident->add_option("--n", id.n, "State dimension for the default guess");
    ident->add_option("--rank", id.rank, "Dissipation factor rank (0 = n/10 rule)");
    auto* gs = ident->add_option("--guess-seed", id.guess_seed,
                                 "Seed for the default guess (defaults to --seed)");
    ident->add_option("--max-iters", id.cfg.max_iters, "Gradient iteration budget")
        ->capture_default_str();
    ident->add_option("--sigma0", id.cfg.sigma0, "Initial line-search step")
        ->capture_default_str();
    ident->add_option("--beta", id.cfg.armijo_beta, "Backtracking factor")
        ->capture_default_str();
    ident->add_option("--c", id.cfg.armijo_c, "Armijo slope fraction")->capture_default_str();
    ident->add_option("--max-backtracks", id.cfg.armijo_max_backtracks,
                      "Line-search trials per iteration")
        ->capture_default_str();
    ident->add_option("--eps-grad", id.cfg.eps_grad, "Gradient-norm stopping threshold")
        ->capture_default_str();
    ident->add_option("--eps-update", id.cfg.eps_update, "Gradient-drift stopping threshold")
        ->capture_default_str();
    ident->add_option("--q-mode", id.q_mode, "Q update: 'retraction' or 'flat'")
        ->capture_default_str();
    ident->add_option("--lambda", id.cfg.lambda, "Reference-penalty weight")
        ->capture_default_str();
    add_data_options(ident, id_opts_common);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Integrate a stored system");
    std::string sim_system, sim_input;
    sim->add_option("--system", sim_system, "System directory")->required();
    sim->add_option("--input", sim_input,
                    "Input signal CSV (default: the standard two-channel input)");
    add_data_options(sim, sim_opts);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Compare adjoint gradients to finite differences");
    Index gc_n = 3, gc_m = 2, gc_r = 0;
    double gc_h = 1e-6;
    gc->add_option("--n", gc_n, "State dimension (at most 10)")->capture_default_str();
    gc->add_option("--m", gc_m, "Input/output channels")->capture_default_str();
    gc->add_option("--rank", gc_r, "Dissipation factor rank (0 = n/10 rule)");
    gc->add_option("--fd-step", gc_h, "Finite-difference step")->capture_default_str();
    gc->add_option("--seed", gc_opts.seed, "Random seed")->capture_default_str();
    gc->add_option("--dt", gc_opts.dt, "Time step")->capture_default_str();
    gc->add_option("--horizon", gc_opts.horizon, "Final time T")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    // PHIDENT_SEED overrides --seed whenever it is set.
    if (const char* env_seed = std::getenv("PHIDENT_SEED")) {
        char* end = nullptr;
        const std::uint64_t value = std::strtoull(env_seed, &end, 10);
        if (end == env_seed || *end != '\0') {
            std::fprintf(stderr, "PHIDENT_SEED is not an integer: %s\n", env_seed);
            return 2;
        }
        for (CommonOpts* o : {&synth_opts, &msd_opts, &id_opts_common, &sim_opts, &gc_opts})
            o->seed = value;
    }
    id.guess_seed_given = gs->count() > 0;

    try {
        if (app.got_subcommand(synth))
            return cmd_synth(synth_opts, synth_n, synth_m, synth_r, synth_sigma);
        if (app.got_subcommand(msd)) {
            if (msd->count("--horizon") == 0) msd_opts.horizon = 5.0;
            return cmd_msd(msd_opts, msd_params, msd_sigma);
        }
        if (app.got_subcommand(ident)) return cmd_identify(id_opts_common, id);
        if (app.got_subcommand(sim)) return cmd_simulate(sim_opts, sim_system, sim_input);
        if (app.got_subcommand(gc)) return cmd_gradcheck(gc_opts, gc_n, gc_m, gc_r, gc_h);
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const GridError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 2;  // unreachable: require_subcommand(1)
}
