// Command-line surface for the orbit-moment toolkit.
//
// Every subcommand reads one JSON config (--config), honors the shared
// --seed/--out/--workers flags, writes its artifacts into the output
// directory, and records a manifest with content hashes of all inputs and
// outputs.  `rerun` replays a manifest and verifies that the outputs come
// back bit-identical.
//
// Exit codes: 0 success, 1 config/schema error (the offending JSON path is
// named), 2 I/O error, 3 numerical failure (a diagnostic file is written).

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "omt/core/parallel.hpp"
#include "omt/core/rng.hpp"
#include "omt/core/tensor.hpp"
#include "omt/cryo/encoder2d.hpp"
#include "omt/cryo/fit_volume.hpp"
#include "omt/cryo/moments2d.hpp"
#include "omt/cryo/neural_volume.hpp"
#include "omt/cryo/quad_moments.hpp"
#include "omt/cryo/quadrature.hpp"
#include "omt/cryo/reconstruct.hpp"
#include "omt/cryo/slice.hpp"
#include "omt/cryo/vmf.hpp"
#include "omt/cryo/volume.hpp"
#include "omt/eval/align3d.hpp"
#include "omt/eval/fsc.hpp"
#include "omt/io/csv.hpp"
#include "omt/io/manifest.hpp"
#include "omt/io/mrc.hpp"
#include "omt/io/omt1.hpp"
#include "omt/mra/metrics.hpp"
#include "omt/mra/mixture.hpp"
#include "omt/mra/moments.hpp"
#include "omt/mra/spectral.hpp"
#include "omt/mra_enc/dataset.hpp"
#include "omt/mra_enc/encoder.hpp"
#include "omt/mra_enc/refine.hpp"
#include "omt/mra_enc/train.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace omt;

// ---------------------------------------------------------------------------
// error taxonomy
// ---------------------------------------------------------------------------

struct SchemaError : std::exception {
    std::string msg;
    explicit SchemaError(std::string m) : msg(std::move(m)) {}
    const char* what() const noexcept override { return msg.c_str(); }
};

struct IoError : std::exception {
    std::string msg;
    explicit IoError(std::string m) : msg(std::move(m)) {}
    const char* what() const noexcept override { return msg.c_str(); }
};

struct NumError : std::exception {
    std::string msg;
    explicit NumError(std::string m) : msg(std::move(m)) {}
    const char* what() const noexcept override { return msg.c_str(); }
};

[[noreturn]] void schema_fail(const std::string& path, const std::string& why) {
    throw SchemaError(path + ": " + why);
}

/// Converts reader/loader failures into I/O errors.
template <typename F>
auto io_guard(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw IoError(what + ": " + e.what());
    }
}

/// Converts compute-stage runtime failures into numerical errors; domain
/// validation (invalid_argument) stays a config error.
template <typename F>
auto num_guard(F&& f) {
    try {
        return f();
    } catch (const std::runtime_error& e) {
        throw NumError(e.what());
    }
}

// ---------------------------------------------------------------------------
// schema-checked config cursor
// ---------------------------------------------------------------------------

/// A cursor over one JSON object that type-checks every access, tracks the
/// JSON path for error messages, and rejects unknown fields on finish().
class Cfg {
  public:
    Cfg(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) schema_fail(path_, "expected an object");
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& k) const { return path_ + "." + k; }
    bool has(const std::string& k) const { return j_->contains(k); }

    const json& child(const std::string& k) {
        mark(k);
        auto it = j_->find(k);
        if (it == j_->end()) schema_fail(at(k), "missing required field");
        return *it;
    }

    const json* child_opt(const std::string& k) {
        mark(k);
        auto it = j_->find(k);
        return it == j_->end() ? nullptr : &*it;
    }

    double num(const std::string& k) { return as_num(child(k), at(k)); }
    double num(const std::string& k, double dflt) {
        const json* c = child_opt(k);
        return c ? as_num(*c, at(k)) : dflt;
    }

    std::uint64_t uint(const std::string& k) { return as_uint(child(k), at(k)); }
    std::uint64_t uint(const std::string& k, std::uint64_t dflt) {
        const json* c = child_opt(k);
        return c ? as_uint(*c, at(k)) : dflt;
    }

    bool flag(const std::string& k, bool dflt) {
        const json* c = child_opt(k);
        if (!c) return dflt;
        if (!c->is_boolean()) schema_fail(at(k), "expected a boolean");
        return c->get<bool>();
    }

    std::string str(const std::string& k) { return as_str(child(k), at(k)); }
    std::string str(const std::string& k, const std::string& dflt) {
        const json* c = child_opt(k);
        return c ? as_str(*c, at(k)) : dflt;
    }

    const json& arr(const std::string& k) {
        const json& c = child(k);
        if (!c.is_array()) schema_fail(at(k), "expected an array");
        return c;
    }

    void finish() {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!seen_.count(it.key())) schema_fail(at(it.key()), "unknown field");
    }

    static double as_num(const json& j, const std::string& p) {
        if (!j.is_number()) schema_fail(p, "expected a number");
        return j.get<double>();
    }

    static std::uint64_t as_uint(const json& j, const std::string& p) {
        if (j.is_number_unsigned()) return j.get<std::uint64_t>();
        if (j.is_number_integer()) {
            auto v = j.get<std::int64_t>();
            if (v < 0) schema_fail(p, "expected a nonnegative integer");
            return std::uint64_t(v);
        }
        schema_fail(p, "expected an integer");
    }

    static std::string as_str(const json& j, const std::string& p) {
        if (!j.is_string()) schema_fail(p, "expected a string");
        return j.get<std::string>();
    }

  private:
    void mark(const std::string& k) { seen_.insert(k); }

    const json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::array<double, 3> as_vec3(const json& j, const std::string& p) {
    if (!j.is_array() || j.size() != 3) schema_fail(p, "expected an array of 3 numbers");
    std::array<double, 3> v{};
    for (std::size_t i = 0; i < 3; ++i) v[i] = Cfg::as_num(j[i], p + "[" + std::to_string(i) + "]");
    return v;
}

// ---------------------------------------------------------------------------
// run context: artifact registry + manifest bookkeeping
// ---------------------------------------------------------------------------

struct RunCtx {
    std::string command;
    fs::path out_dir;
    std::uint64_t seed = 0;
    int workers = 1;
    json config;

    std::vector<std::string> inputs;                        // as given
    std::vector<std::pair<std::string, std::string>> outs;  // (out-relative, full)
    json report = json::object();

    std::string in_file(const std::string& p) {
        if (!fs::exists(p)) throw IoError("input file not found: " + p);
        inputs.push_back(p);
        return p;
    }

    std::string out_file(const std::string& rel) {
        fs::path r(rel);
        if (r.is_absolute() || rel.find("..") != std::string::npos)
            throw SchemaError("output name '" + rel +
                              "': must be a relative path inside the output directory");
        fs::path full = out_dir / r;
        if (full.has_parent_path()) fs::create_directories(full.parent_path());
        outs.emplace_back(rel, full.string());
        return full.string();
    }

    std::string manifest_path() const { return (out_dir / (command + ".manifest.json")).string(); }
};

/// Stamp a path, and its sidecar when one exists, into the given list.
void stamp_into(std::vector<FileStamp>& list, const std::string& recorded_path,
                const std::string& real_path) {
    list.push_back({recorded_path, io_guard("hashing " + real_path,
                                            [&] { return sha256_file(real_path); })});
    if (fs::exists(real_path + ".json"))
        list.push_back({recorded_path + ".json", sha256_file(real_path + ".json")});
}

void finalize_run(RunCtx& ctx) {
    // the report is itself an artifact
    const std::string report_rel = ctx.command + ".report.json";
    const std::string report_full = ctx.out_file(report_rel);
    {
        std::ofstream f(report_full);
        if (!f) throw IoError("cannot write " + report_full);
        f << ctx.report.dump(2) << "\n";
    }

    Manifest m;
    m.command = ctx.command;
    m.config = ctx.config;
    m.seed = ctx.seed;
    m.workers = ctx.workers;
    for (const auto& p : ctx.inputs) stamp_into(m.inputs, p, p);
    for (const auto& [rel, full] : ctx.outs) stamp_into(m.outputs, rel, full);
    io_guard("writing manifest", [&] {
        write_manifest(ctx.manifest_path(), m);
        return 0;
    });
}

// ---------------------------------------------------------------------------
// shared config fragments
// ---------------------------------------------------------------------------

MixtureSpec1D parse_mixture(const json& j, const std::string& path) {
    Cfg c(j, path);
    MixtureSpec1D spec;
    const json& comps = c.arr("components");
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string p = path + ".components[" + std::to_string(i) + "]";
        Cfg e(comps[i], p);
        MixtureComponent mc;
        mc.weight = e.num("weight", 1.0);
        mc.mean = e.num("mean", 0.0);
        mc.stddev = e.num("stddev");
        e.finish();
        spec.components.push_back(mc);
    }
    spec.wrap = c.flag("wrap", true);
    c.finish();
    try {
        spec.validate();
    } catch (const std::exception& e) {
        schema_fail(path, e.what());
    }
    return spec;
}

MraSignal parse_signal(const json& j, const std::string& path, std::size_t n) {
    Cfg c(j, path);
    if (c.has("mixture") == c.has("values"))
        schema_fail(path, "give exactly one of 'mixture' or 'values'");
    if (c.has("mixture")) {
        MixtureSpec1D spec = parse_mixture(c.child("mixture"), c.at("mixture"));
        c.finish();
        return mixture_signal(spec, n);
    }
    const json& vals = c.arr("values");
    if (vals.size() != n) schema_fail(c.at("values"), "expected exactly n entries");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = Cfg::as_num(vals[i], c.at("values") + "[" + std::to_string(i) + "]");
    c.finish();
    return MraSignal::from_real(std::move(v));
}

MraDensity parse_density(const json& j, const std::string& path, std::size_t n) {
    Cfg c(j, path);
    const int given = int(c.has("mixture")) + int(c.has("mass")) + int(c.has("uniform"));
    if (given != 1) schema_fail(path, "give exactly one of 'mixture', 'mass', or 'uniform'");
    if (c.has("uniform")) {
        if (!c.flag("uniform", false)) schema_fail(c.at("uniform"), "must be true when present");
        c.finish();
        return MraDensity::normalized(std::vector<double>(n, 1.0));
    }
    if (c.has("mixture")) {
        MixtureSpec1D spec = parse_mixture(c.child("mixture"), c.at("mixture"));
        c.finish();
        return mixture_density(spec, n);
    }
    const json& vals = c.arr("mass");
    if (vals.size() != n) schema_fail(c.at("mass"), "expected exactly n entries");
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i)
        m[i] = Cfg::as_num(vals[i], c.at("mass") + "[" + std::to_string(i) + "]");
    c.finish();
    try {
        return MraDensity::normalized(std::move(m));
    } catch (const std::exception& e) {
        schema_fail(c.at("mass"), e.what());
    }
}

GaussianVolumeSpec parse_gaussian_volume(const json& j, const std::string& path) {
    Cfg c(j, path);
    if (c.flag("default", false)) {
        c.finish();
        return default_gaussian_volume();
    }
    GaussianVolumeSpec spec;
    const json& comps = c.arr("components");
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string p = path + ".components[" + std::to_string(i) + "]";
        Cfg e(comps[i], p);
        GaussianComponent gc;
        gc.weight = e.num("weight", 1.0);
        auto ctr = as_vec3(e.child("center"), e.at("center"));
        gc.center = {ctr[0], ctr[1], ctr[2]};
        gc.stddev = e.num("stddev");
        e.finish();
        spec.components.push_back(gc);
    }
    c.finish();
    try {
        validate_gaussian_volume(spec);
    } catch (const std::exception& e) {
        schema_fail(path, e.what());
    }
    return spec;
}

VmfMixtureSpec parse_vmf(const json& j, const std::string& path) {
    Cfg c(j, path);
    if (c.has("default_kappa")) {
        double kappa = c.num("default_kappa");
        c.finish();
        try {
            return default_vmf_mixture(kappa);
        } catch (const std::exception& e) {
            schema_fail(c.at("default_kappa"), e.what());
        }
    }
    VmfMixtureSpec spec;
    const json& comps = c.arr("components");
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const std::string p = path + ".components[" + std::to_string(i) + "]";
        Cfg e(comps[i], p);
        VmfComponent vc;
        vc.weight = e.num("weight", 1.0);
        auto mu = as_vec3(e.child("mu"), e.at("mu"));
        vc.mu = {mu[0], mu[1], mu[2]};
        vc.kappa = e.num("kappa", 0.0);
        e.finish();
        spec.components.push_back(vc);
    }
    c.finish();
    try {
        validate_vmf(spec);
    } catch (const std::exception& e) {
        schema_fail(path, e.what());
    }
    return spec;
}

QuadratureSet parse_quadrature(const json& j, const std::string& path) {
    Cfg c(j, path);
    const int given = int(c.has("desk")) + int(c.has("dense")) +
                      int(c.has("directions") || c.has("inplane"));
    if (given != 1)
        schema_fail(path, "give exactly one of 'desk', 'dense', or 'directions'+'inplane'");
    if (c.has("desk")) {
        if (!c.flag("desk", false)) schema_fail(c.at("desk"), "must be true when present");
        c.finish();
        return desk_quadrature();
    }
    if (c.has("dense")) {
        if (!c.flag("dense", false)) schema_fail(c.at("dense"), "must be true when present");
        c.finish();
        return dense_quadrature();
    }
    std::size_t q1 = c.uint("directions");
    std::size_t q2 = c.uint("inplane");
    c.finish();
    try {
        return build_quadrature(q1, q2);
    } catch (const std::exception& e) {
        schema_fail(path, e.what());
    }
}

std::vector<std::pair<double, std::size_t>> parse_schedule(const json& j,
                                                           const std::string& path) {
    if (!j.is_array() || j.empty()) schema_fail(path, "expected a non-empty array");
    std::vector<std::pair<double, std::size_t>> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (!j[i].is_array() || j[i].size() != 2)
            schema_fail(p, "expected [learning_rate, epochs]");
        const double lr = Cfg::as_num(j[i][0], p + "[0]");
        const std::uint64_t ep = Cfg::as_uint(j[i][1], p + "[1]");
        if (!(lr > 0)) schema_fail(p + "[0]", "learning rate must be positive");
        if (ep < 1) schema_fail(p + "[1]", "epochs must be at least 1");
        out.emplace_back(lr, std::size_t(ep));
    }
    return out;
}

// ---------------------------------------------------------------------------
// artifact helpers
// ---------------------------------------------------------------------------

RTensor read_real(RunCtx& ctx, const std::string& p) {
    return io_guard("reading " + p, [&] { return read_omt1_real(ctx.in_file(p)); });
}

CTensor read_complex(RunCtx& ctx, const std::string& p) {
    return io_guard("reading " + p, [&] { return read_omt1_complex(ctx.in_file(p)); });
}

/// Volume file by extension: .mrc or a rank-3 real OMT1 tensor.
RTensor read_volume_file(RunCtx& ctx, const std::string& p, double* voxel_out = nullptr) {
    const bool is_mrc = p.size() > 4 && p.substr(p.size() - 4) == ".mrc";
    if (is_mrc) {
        MrcVolume v = io_guard("reading " + p, [&] { return read_mrc(ctx.in_file(p)); });
        if (voxel_out) *voxel_out = v.voxel_size;
        return v.data;
    }
    RTensor t = read_real(ctx, p);
    if (t.rank() != 3) throw IoError(p + ": expected a rank-3 volume");
    return t;
}

std::string moment_kind_name(MomentKind k) {
    return k == MomentKind::empirical ? "empirical" : "analytic";
}

void write_csv_table(const std::string& full, const CsvTable& t) {
    io_guard("writing " + full, [&] {
        write_csv(full, t.header, t.rows);
        return 0;
    });
}

// ---------------------------------------------------------------------------
// MRA pipeline commands
// ---------------------------------------------------------------------------

void cmd_simulate_mra(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::size_t n = c.uint("n");
    const std::size_t count = c.uint("count");
    const double sigma = c.num("sigma");
    MraSignal v = parse_signal(c.child("signal"), c.at("signal"), n);
    MraDensity rho = parse_density(c.child("density"), c.at("density"), n);
    const std::string out = ctx.out_file(c.str("observations_out", "observations.omt1"));
    c.finish();

    RTensor batch = num_guard(
        [&] { return simulate_observations(v, rho, count, sigma, SeededRng(ctx.seed, "mra-sim")); });
    io_guard("writing " + out, [&] {
        write_omt1(out, batch,
                   {{"n", n}, {"count", count}, {"sigma", sigma}, {"seed", ctx.seed}});
        return 0;
    });
    ctx.report = {{"n", n}, {"count", count}, {"sigma", sigma}};
    std::cout << "simulate-mra: wrote " << count << " observations of length " << n << "\n";
}

void cmd_moments_mra(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string m1_out = ctx.out_file(c.str("m1_out", "m1.omt1"));
    const std::string m2_out = ctx.out_file(c.str("m2_out", "m2.omt1"));

    MomentPair p;
    if (c.flag("analytic", false)) {
        const std::size_t n = c.uint("n");
        MraSignal v = parse_signal(c.child("signal"), c.at("signal"), n);
        MraDensity rho = parse_density(c.child("density"), c.at("density"), n);
        c.finish();
        p = num_guard([&] { return analytic_moments(v, rho); });
    } else {
        const std::string obs = c.str("observations");
        const double sigma = c.num("sigma");
        c.finish();
        RTensor batch = read_real(ctx, obs);
        if (batch.rank() != 2) throw IoError(obs + ": expected a rank-2 observation batch");
        p = num_guard([&] { return empirical_moments(batch, sigma); });
    }

    json meta = {{"n", p.n},
                 {"kind", moment_kind_name(p.kind)},
                 {"sigma", p.sigma},
                 {"count", p.count}};
    io_guard("writing " + m1_out, [&] {
        write_omt1(m1_out, p.m1, meta);
        return 0;
    });
    io_guard("writing " + m2_out, [&] {
        write_omt1(m2_out, p.m2, meta);
        return 0;
    });
    ctx.report = meta;
    std::cout << "moments-mra: " << moment_kind_name(p.kind) << " moments at n = " << p.n << "\n";
}

void cmd_invert_spectral(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string m2_path = c.str("m2");
    SpectralOptions opt;
    opt.assume_unit_modulus = c.flag("assume_unit_modulus", true);
    opt.degenerate_gap = c.num("degenerate_gap", opt.degenerate_gap);
    opt.use_power_iteration = c.flag("power_iteration", false);
    opt.power_iters = c.uint("power_iters", opt.power_iters);
    const std::string sig_out = ctx.out_file(c.str("signal_out", "signal_fourier.omt1"));
    const std::string den_out = ctx.out_file(c.str("density_out", "density.omt1"));
    c.finish();

    CTensor m2 = read_complex(ctx, m2_path);
    if (m2.rank() != 2 || m2.extent(0) != m2.extent(1))
        throw IoError(m2_path + ": expected a square second-moment matrix");
    SpectralResult res = num_guard([&] { return spectral_invert(m2, opt); });

    const std::size_t n = res.vhat.size();
    CTensor vhat({n});
    for (std::size_t i = 0; i < n; ++i) vhat[i] = res.vhat[i];
    RTensor mass({n});
    for (std::size_t i = 0; i < n; ++i) mass[i] = res.rho.mass[i];
    io_guard("writing " + sig_out, [&] {
        write_omt1(sig_out, vhat, {{"n", n}, {"content", "signal spectrum"}});
        return 0;
    });
    io_guard("writing " + den_out, [&] {
        write_omt1(den_out, mass, {{"n", n}, {"content", "shift density"}});
        return 0;
    });
    ctx.report = {{"n", n}, {"degenerate", res.degenerate}, {"min_gap", res.min_gap}};
    std::cout << "invert-spectral: n = " << n << (res.degenerate ? " (degenerate spectrum)" : "")
              << "\n";
}

void cmd_make_dataset(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::size_t n = c.uint("n");
    const std::size_t count = c.uint("count");
    DatasetFamily family;
    if (const json* f = c.child_opt("family")) {
        Cfg fc(*f, c.at("family"));
        family.signal_components = fc.uint("signal_components", family.signal_components);
        family.density_components = fc.uint("density_components", family.density_components);
        family.stddev_lo = fc.num("stddev_lo", family.stddev_lo);
        family.stddev_hi = fc.num("stddev_hi", family.stddev_hi);
        fc.finish();
    }
    const std::string prefix = c.str("out_prefix", "dataset");
    c.finish();

    MraDataset ds = num_guard([&] { return make_dataset(family, count, n, ctx.seed); });
    json meta = {{"n", n},
                 {"count", count},
                 {"seed", ctx.seed},
                 {"family",
                  {{"signal_components", family.signal_components},
                   {"density_components", family.density_components},
                   {"stddev_lo", family.stddev_lo},
                   {"stddev_hi", family.stddev_hi}}}};
    auto put = [&](const std::string& suffix, const RTensor& t) {
        const std::string out = ctx.out_file(prefix + suffix);
        io_guard("writing " + out, [&] {
            write_omt1(out, t, meta);
            return 0;
        });
    };
    put("_m1.omt1", ds.inputs_m1);
    put("_m2.omt1", ds.inputs_m2);
    put("_rho.omt1", ds.targets_rho);
    put("_v.omt1", ds.targets_v);
    ctx.report = meta;
    std::cout << "make-dataset: " << count << " pairs at n = " << n << "\n";
}

MraDataset load_dataset(RunCtx& ctx, const std::string& prefix) {
    MraDataset ds;
    ds.inputs_m1 = read_real(ctx, prefix + "_m1.omt1");
    ds.inputs_m2 = read_real(ctx, prefix + "_m2.omt1");
    ds.targets_rho = read_real(ctx, prefix + "_rho.omt1");
    ds.targets_v = read_real(ctx, prefix + "_v.omt1");
    if (ds.inputs_m1.rank() != 3 || ds.inputs_m2.rank() != 3 || ds.targets_rho.rank() != 2 ||
        ds.targets_v.rank() != 2)
        throw IoError("dataset files at '" + prefix + "': unexpected tensor ranks");
    ds.count = ds.inputs_m1.extent(0);
    ds.n = ds.inputs_m1.extent(2);
    if (ds.inputs_m2.extent(0) != ds.count || ds.targets_rho.extent(0) != ds.count ||
        ds.targets_v.extent(0) != ds.count || ds.targets_rho.extent(1) != ds.n ||
        ds.inputs_m2.extent(1) != 2 * ds.n || ds.inputs_m2.extent(2) != ds.n ||
        ds.targets_v.extent(1) != 2 * ds.n)
        throw IoError("dataset files at '" + prefix + "': inconsistent shapes");
    return ds;
}

MraEncoder::Head parse_head(const std::string& s, const std::string& path) {
    if (s == "rho") return MraEncoder::Head::rho;
    if (s == "v") return MraEncoder::Head::v;
    schema_fail(path, "expected \"rho\" or \"v\"");
}

void cmd_train_encoder(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string prefix = c.str("dataset_prefix");
    MraEncoder::Head head = parse_head(c.str("head"), c.at("head"));
    TrainConfig tc;
    tc.seed = ctx.seed;
    if (const json* t = c.child_opt("train")) {
        Cfg tcfg(*t, c.at("train"));
        tc.test_fraction = tcfg.num("test_fraction", tc.test_fraction);
        tc.batch = tcfg.uint("batch", tc.batch);
        if (const json* s = tcfg.child_opt("schedule"))
            tc.schedule = parse_schedule(*s, tcfg.at("schedule"));
        tc.error_sample_cap = tcfg.uint("error_sample_cap", tc.error_sample_cap);
        tcfg.finish();
    }
    const std::string enc_out = ctx.out_file(c.str("encoder_out", "encoder.omtp"));
    const std::string trace_out = ctx.out_file(c.str("trace_out", "train_trace.csv"));
    c.finish();

    MraDataset ds = load_dataset(ctx, prefix);
    MraEncoder enc = build_mra_encoder(ds.n, head, ctx.seed);
    TrainResult res = num_guard([&] { return train_supervised(enc, ds, tc); });

    io_guard("writing " + enc_out, [&] {
        save_mra_encoder(enc_out, enc);
        return 0;
    });
    write_csv_table(trace_out, res.trace);
    ctx.report = {{"n", ds.n},
                  {"count", ds.count},
                  {"head", c.str("head")},
                  {"train_error", res.train_error},
                  {"test_error", res.test_error},
                  {"final_loss", res.final_loss}};
    std::cout << "train-encoder: head " << cfg.at("head").get<std::string>()
              << ", train error " << res.train_error << ", test error " << res.test_error << "\n";
}

MomentPair read_mra_moments(RunCtx& ctx, const std::string& m1_path,
                            const std::string& m2_path) {
    MomentPair p;
    p.m1 = read_complex(ctx, m1_path);
    p.m2 = read_complex(ctx, m2_path);
    if (p.m1.rank() != 1 || p.m2.rank() != 2 || p.m2.extent(0) != p.m1.extent(0) ||
        p.m2.extent(1) != p.m1.extent(0))
        throw IoError(m1_path + ", " + m2_path + ": moment shapes are inconsistent");
    p.n = p.m1.extent(0);
    json meta = io_guard("reading sidecar of " + m1_path, [&] { return read_sidecar(m1_path); });
    if (meta.contains("kind") && meta["kind"] == "empirical") {
        p.kind = MomentKind::empirical;
        if (meta.contains("sigma")) p.sigma = meta["sigma"].get<double>();
        if (meta.contains("count")) p.count = meta["count"].get<std::size_t>();
    }
    return p;
}

void cmd_recon_mra(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string m1_path = c.str("m1");
    const std::string m2_path = c.str("m2");
    const std::string encv_path = c.str("encoder_v");
    const std::string encr_path = c.str("encoder_rho");
    ReconConfig rc;
    if (const json* r = c.child_opt("recon")) {
        Cfg rcfg(*r, c.at("recon"));
        rc.lambda = rcfg.num("lambda", rc.lambda);
        if (const json* s = rcfg.child_opt("lr_schedule"))
            rc.lr_schedule = parse_schedule(*s, rcfg.at("lr_schedule"));
        rc.project_density = rcfg.flag("project_density", rc.project_density);
        rc.align = rcfg.flag("align", rc.align);
        rc.trace_every = rcfg.uint("trace_every", rc.trace_every);
        rcfg.finish();
    }
    std::string truth_sig_path, truth_den_path;
    if (const json* t = c.child_opt("truth")) {
        Cfg tcfg(*t, c.at("truth"));
        truth_sig_path = tcfg.str("signal_fourier", "");
        truth_den_path = tcfg.str("density", "");
        tcfg.finish();
    }
    const std::string sig_out = ctx.out_file(c.str("signal_out", "signal_fourier.omt1"));
    const std::string den_out = ctx.out_file(c.str("density_out", "density.omt1"));
    const std::string trace_out = ctx.out_file(c.str("trace_out", "recon_trace.csv"));
    c.finish();

    MomentPair mhat = read_mra_moments(ctx, m1_path, m2_path);
    MraEncoder enc_v = io_guard("loading " + encv_path,
                                [&] { return load_mra_encoder(ctx.in_file(encv_path)); });
    MraEncoder enc_rho = io_guard("loading " + encr_path,
                                  [&] { return load_mra_encoder(ctx.in_file(encr_path)); });
    if (enc_v.head != MraEncoder::Head::v)
        throw IoError(encv_path + ": encoder does not carry a signal head");
    if (enc_rho.head != MraEncoder::Head::rho)
        throw IoError(encr_path + ": encoder does not carry a density head");

    MraSignal truth_sig;
    MraDensity truth_den;
    const MraSignal* ts = nullptr;
    const MraDensity* td = nullptr;
    if (!truth_sig_path.empty()) {
        CTensor vh = read_complex(ctx, truth_sig_path);
        if (vh.rank() != 1 || vh.extent(0) != mhat.n)
            throw IoError(truth_sig_path + ": truth spectrum has the wrong shape");
        std::vector<cdouble> vec(vh.size());
        for (std::size_t i = 0; i < vh.size(); ++i) vec[i] = vh[i];
        truth_sig = MraSignal::from_fourier(vec);
        ts = &truth_sig;
    }
    if (!truth_den_path.empty()) {
        RTensor mass = read_real(ctx, truth_den_path);
        if (mass.rank() != 1 || mass.extent(0) != mhat.n)
            throw IoError(truth_den_path + ": truth density has the wrong shape");
        truth_den = MraDensity::normalized(
            std::vector<double>(mass.data(), mass.data() + mass.size()));
        td = &truth_den;
    }

    RefineResult res = num_guard([&] { return refine(enc_v, enc_rho, mhat, rc, ts, td); });

    CTensor zv({mhat.n});
    for (std::size_t i = 0; i < mhat.n; ++i) zv[i] = res.z_v[i];
    RTensor zr({mhat.n});
    for (std::size_t i = 0; i < mhat.n; ++i) zr[i] = res.z_rho[i];
    io_guard("writing " + sig_out, [&] {
        write_omt1(sig_out, zv, {{"n", mhat.n}, {"shift", res.shift}});
        return 0;
    });
    io_guard("writing " + den_out, [&] {
        write_omt1(den_out, zr, {{"n", mhat.n}, {"projected", rc.project_density}});
        return 0;
    });
    write_csv_table(trace_out, res.trace);
    ctx.report = {{"n", mhat.n},
                  {"initial_loss", res.initial_loss},
                  {"final_loss", res.final_loss},
                  {"shift", res.shift}};
    std::cout << "recon-mra: loss " << res.initial_loss << " -> " << res.final_loss << "\n";
}

// ---------------------------------------------------------------------------
// volume / cryo pipeline commands
// ---------------------------------------------------------------------------

void cmd_fit_volume(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    CTensor target;
    {
        Cfg t(c.child("target"), c.at("target"));
        if (t.has("path") == (t.has("gaussian") || t.has("n")))
            schema_fail(c.at("target"), "give 'path', or 'gaussian' with 'n'");
        if (t.has("path")) {
            const std::string p = t.str("path");
            t.finish();
            target = io_guard("reading " + p,
                              [&] { return read_omt1_any_complex(ctx.in_file(p)); });
            if (target.rank() != 3 || target.extent(0) != target.extent(1) ||
                target.extent(1) != target.extent(2))
                throw IoError(p + ": expected a cubic Fourier-grid tensor");
        } else {
            const std::size_t n = t.uint("n");
            GaussianVolumeSpec spec = parse_gaussian_volume(t.child("gaussian"), t.at("gaussian"));
            t.finish();
            target = volume_fourier_grid(gaussian_fourier_fn(spec), n);
        }
    }
    const std::size_t n = target.extent(0);

    double kmax = double(n) / 2.0;
    std::size_t octaves = 8, hidden = 64;
    if (const json* v = c.child_opt("volume")) {
        Cfg vc(*v, c.at("volume"));
        kmax = vc.num("kmax", kmax);
        octaves = vc.uint("octaves", octaves);
        hidden = vc.uint("hidden", hidden);
        vc.finish();
    }
    FitConfig fcfg;
    if (const json* f = c.child_opt("fit")) {
        Cfg fc(*f, c.at("fit"));
        if (const json* s = fc.child_opt("schedule"))
            fcfg.schedule = parse_schedule(*s, fc.at("schedule"));
        fcfg.trace_every = fc.uint("trace_every", fcfg.trace_every);
        fc.finish();
    }
    const std::string vol_out = ctx.out_file(c.str("volume_out", "volume.omtp"));
    const std::string trace_out = ctx.out_file(c.str("trace_out", "fit_trace.csv"));
    c.finish();

    NeuralVolume vol = make_neural_volume(kmax, ctx.seed, 0, octaves, hidden);
    FitResult res = num_guard([&] { return fit_neural_gt(target, vol, fcfg); });

    io_guard("writing " + vol_out, [&] {
        save_neural_volume(vol_out, vol);
        return 0;
    });
    CsvTable trace;
    trace.header = {"epoch", "lr", "loss"};
    for (const auto& row : res.trace) trace.rows.push_back({row[0], row[1], row[2]});
    write_csv_table(trace_out, trace);
    ctx.report = {{"n", n},
                  {"epochs", res.epochs},
                  {"final_loss", res.final_loss},
                  {"fourier_rel", res.fourier_rel},
                  {"real_rel", res.real_rel}};
    std::cout << "fit-volume: relative error " << res.fourier_rel << " (grid), " << res.real_rel
              << " (box) after " << res.epochs << " epochs\n";
}

struct CryoSimSpec {
    std::size_t n = 0;
    std::size_t count = 0;
    double sigma = 0;
    FourierFn fn;
    VmfMixtureSpec vmf;
};

CryoSimSpec parse_cryo_sim(Cfg& c, RunCtx& ctx) {
    CryoSimSpec s;
    s.n = c.uint("n");
    s.count = c.uint("count");
    s.sigma = c.num("sigma");
    {
        Cfg v(c.child("volume"), c.at("volume"));
        if (v.has("gaussian") == v.has("neural"))
            schema_fail(c.at("volume"), "give exactly one of 'gaussian' or 'neural'");
        if (v.has("gaussian")) {
            GaussianVolumeSpec spec = parse_gaussian_volume(v.child("gaussian"), v.at("gaussian"));
            v.finish();
            s.fn = gaussian_fourier_fn(spec);
        } else {
            const std::string p = v.str("neural");
            std::vector<double> latent;
            if (const json* l = v.child_opt("latent")) {
                if (!l->is_array()) schema_fail(v.at("latent"), "expected an array of numbers");
                for (std::size_t i = 0; i < l->size(); ++i)
                    latent.push_back(
                        Cfg::as_num((*l)[i], v.at("latent") + "[" + std::to_string(i) + "]"));
            }
            v.finish();
            NeuralVolume nv =
                io_guard("loading " + p, [&] { return load_neural_volume(ctx.in_file(p)); });
            if (latent.size() != nv.latent_width)
                schema_fail(c.at("volume") + ".latent",
                            "expected " + std::to_string(nv.latent_width) + " entries");
            s.fn = neural_fourier_fn(std::move(nv), std::move(latent));
        }
    }
    s.vmf = parse_vmf(c.child("distribution"), c.at("distribution"));
    return s;
}

void cmd_simulate_cryoem(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    CryoSimSpec s = parse_cryo_sim(c, ctx);
    const std::string img_out = ctx.out_file(c.str("images_out", "images.omt1"));
    const std::string rot_out = ctx.out_file(c.str("rotations_out", "rotations.omt1"));
    c.finish();

    std::vector<Rotation> rots = num_guard(
        [&] { return sample_rotations(s.vmf, s.count, SeededRng(ctx.seed, "cryo-rot")); });
    RTensor imgs = num_guard([&] {
        return simulate_images(s.fn, rots, s.sigma, SeededRng(ctx.seed, "cryo-sim"), s.n);
    });

    RTensor rmat({s.count, 3, 3});
    for (std::size_t i = 0; i < s.count; ++i)
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t cc = 0; cc < 3; ++cc) rmat.at3(i, r, cc) = rots[i].at(r, cc);

    json meta = {{"n", s.n}, {"count", s.count}, {"sigma", s.sigma}, {"seed", ctx.seed}};
    io_guard("writing " + img_out, [&] {
        write_omt1(img_out, imgs, meta);
        return 0;
    });
    io_guard("writing " + rot_out, [&] {
        write_omt1(rot_out, rmat, meta);
        return 0;
    });
    ctx.report = meta;
    std::cout << "simulate-cryoem: " << s.count << " images at n = " << s.n << "\n";
}

void cmd_moments_cryoem(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const bool fused = c.has("simulate");
    if (fused == (c.has("images") || c.has("sigma")))
        schema_fail("$", "give either 'simulate' or 'images'+'sigma'");
    const bool bandlimit = c.flag("bandlimit", false);
    const std::string m1_out = ctx.out_file(c.str("m1_out", "m1.omt1"));
    const std::string m2_out = ctx.out_file(c.str("m2_out", "m2.omt1"));

    CryoMomentPair p;
    if (fused) {
        Cfg sc(c.child("simulate"), "$.simulate");
        CryoSimSpec s = parse_cryo_sim(sc, ctx);
        sc.finish();
        c.finish();
        std::vector<Rotation> rots = num_guard(
            [&] { return sample_rotations(s.vmf, s.count, SeededRng(ctx.seed, "cryo-rot")); });
        p = num_guard([&] {
            return simulate_and_moments_2d(s.fn, rots, s.sigma, SeededRng(ctx.seed, "cryo-sim"),
                                           s.n);
        });
    } else {
        const std::string img_path = c.str("images");
        const double sigma = c.num("sigma");
        c.finish();
        RTensor imgs = read_real(ctx, img_path);
        if (imgs.rank() != 3 || imgs.extent(1) != imgs.extent(2))
            throw IoError(img_path + ": expected a [count, n, n] image stack");
        p = num_guard([&] { return empirical_moments_2d(imgs, sigma); });
    }

    if (bandlimit) p = mask_moments(p, bandlimit_indices(p.n));
    json meta = {{"n", p.n},
                 {"kind", moment_kind_name(p.kind)},
                 {"sigma", p.sigma},
                 {"count", p.count},
                 {"bandlimit", bandlimit},
                 {"width", p.m1.extent(0)}};
    io_guard("writing " + m1_out, [&] {
        write_omt1(m1_out, p.m1, meta);
        return 0;
    });
    io_guard("writing " + m2_out, [&] {
        write_omt1(m2_out, p.m2, meta);
        return 0;
    });
    ctx.report = meta;
    std::cout << "moments-cryoem: n = " << p.n << ", width " << p.m1.extent(0)
              << (bandlimit ? " (bandlimited)" : "") << "\n";
}

void cmd_recon_cryoem(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string m1_path = c.str("m1");
    const std::string m2_path = c.str("m2");

    CryoReconConfig rc;
    rc.quadrature = parse_quadrature(c.child("quadrature"), c.at("quadrature"));
    rc.seed = ctx.seed;
    if (const json* r = c.child_opt("recon")) {
        Cfg rcfg(*r, c.at("recon"));
        rc.lambda = rcfg.num("lambda", rc.lambda);
        if (const json* s = rcfg.child_opt("schedule"))
            rc.schedule = parse_schedule(*s, rcfg.at("schedule"));
        rc.use_latent = rcfg.flag("use_latent", rc.use_latent);
        rc.latent_width = rcfg.uint("latent_width", rc.latent_width);
        rc.normalize_terms = rcfg.flag("normalize_terms", rc.normalize_terms);
        rc.bandlimit_mask = rcfg.flag("bandlimit_mask", rc.bandlimit_mask);
        rc.trace_every = rcfg.uint("trace_every", rc.trace_every);
        rc.stagnation_tol = rcfg.num("stagnation_tol", rc.stagnation_tol);
        rc.stagnation_window = rcfg.uint("stagnation_window", rc.stagnation_window);
        rc.octaves = rcfg.uint("octaves", rc.octaves);
        rc.hidden = rcfg.uint("hidden", rc.hidden);
        rcfg.finish();
    }
    const std::string warm_vol_path = c.str("warm_volume", "");
    const std::string warm_enc_path = c.str("warm_encoder", "");
    const double voxel = c.num("voxel", 1.0);
    const std::string vol_out = ctx.out_file(c.str("volume_out", "volume.omtp"));
    const std::string enc_out = ctx.out_file(c.str("encoder_out", "encoder.omtp"));
    const std::string den_out = ctx.out_file(c.str("density_out", "density.omt1"));
    const std::string grid_out = ctx.out_file(c.str("grid_out", "volume_grid.omt1"));
    const std::string mrc_out = ctx.out_file(c.str("mrc_out", "volume.mrc"));
    const std::string trace_out = ctx.out_file(c.str("trace_out", "recon_trace.csv"));
    c.finish();

    CryoMomentPair mhat;
    mhat.m1 = read_complex(ctx, m1_path);
    mhat.m2 = read_complex(ctx, m2_path);
    if (mhat.m1.rank() != 1 || mhat.m2.rank() != 2 ||
        mhat.m2.extent(0) != mhat.m1.extent(0) || mhat.m2.extent(1) != mhat.m1.extent(0))
        throw IoError(m1_path + ", " + m2_path + ": moment shapes are inconsistent");
    json meta = io_guard("reading sidecar of " + m1_path, [&] { return read_sidecar(m1_path); });
    if (!meta.contains("n")) throw IoError(m1_path + ": sidecar does not record the grid size");
    mhat.n = meta["n"].get<std::size_t>();
    if (meta.contains("kind") && meta["kind"] == "empirical") {
        mhat.kind = MomentKind::empirical;
        if (meta.contains("sigma")) mhat.sigma = meta["sigma"].get<double>();
        if (meta.contains("count")) mhat.count = meta["count"].get<std::size_t>();
    }
    const bool file_bandlimited = meta.contains("bandlimit") && meta["bandlimit"].get<bool>();
    if (file_bandlimited != rc.bandlimit_mask)
        schema_fail("$.recon.bandlimit_mask",
                    file_bandlimited
                        ? "the moment files are bandlimited; set it to true"
                        : "the moment files are not bandlimited; set it to false");

    NeuralVolume warm_vol;
    CryoEncoder warm_enc;
    const NeuralVolume* wv = nullptr;
    const CryoEncoder* we = nullptr;
    if (!warm_vol_path.empty()) {
        warm_vol = io_guard("loading " + warm_vol_path,
                            [&] { return load_neural_volume(ctx.in_file(warm_vol_path)); });
        wv = &warm_vol;
    }
    if (!warm_enc_path.empty()) {
        warm_enc = io_guard("loading " + warm_enc_path,
                            [&] { return load_cryo_encoder(ctx.in_file(warm_enc_path)); });
        we = &warm_enc;
    }

    CryoReconResult res = num_guard([&] { return reconstruct(mhat, rc, wv, we); });

    io_guard("writing " + vol_out, [&] {
        save_neural_volume(vol_out, res.volume);
        return 0;
    });
    io_guard("writing " + enc_out, [&] {
        save_cryo_encoder(enc_out, res.encoder);
        return 0;
    });
    RTensor zmass({res.z.size()});
    for (std::size_t j = 0; j < res.z.size(); ++j) zmass[j] = res.z.mass[j];
    io_guard("writing " + den_out, [&] {
        write_omt1(den_out, zmass, {{"count", res.z.size()}, {"content", "viewing density"}});
        return 0;
    });

    CTensor grid = volume_fourier_grid(neural_fourier_fn(res.volume, res.latent), mhat.n);
    io_guard("writing " + grid_out, [&] {
        write_omt1(grid_out, grid, {{"n", mhat.n}, {"content", "volume Fourier grid"}});
        return 0;
    });
    RTensor vol_real = rasterize_fourier(grid);
    io_guard("writing " + mrc_out, [&] {
        write_mrc(mrc_out, vol_real, voxel);
        return 0;
    });

    CsvTable trace;
    trace.header = {"epoch", "lr", "loss", "m1_rel", "m2_rel"};
    for (const auto& row : res.trace)
        trace.rows.push_back({row[0], row[1], row[2], row[3], row[4]});
    write_csv_table(trace_out, trace);

    ctx.report = {{"n", mhat.n},
                  {"epochs", res.epochs},
                  {"initial_loss", res.initial_loss},
                  {"final_loss", res.final_loss},
                  {"m1_rel", res.m1_rel},
                  {"m2_rel", res.m2_rel},
                  {"stagnated", res.stagnated},
                  {"stagnation_epoch", res.stagnation_epoch}};
    std::cout << "recon-cryoem: moment errors " << res.m1_rel << " (first), " << res.m2_rel
              << " (second) after " << res.epochs << " epochs\n";
}

void cmd_eval_fsc(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string path_a = c.str("volume_a");
    const std::string path_b = c.str("volume_b");
    const double threshold = c.num("threshold", 0.5);
    const std::string curve_out = ctx.out_file(c.str("curve_out", "fsc_curve.csv"));
    double voxel_a = 1.0, voxel_b = 1.0;
    RTensor a = read_volume_file(ctx, path_a, &voxel_a);
    RTensor b = read_volume_file(ctx, path_b, &voxel_b);
    const double voxel = c.num("voxel", voxel_a);
    c.finish();

    if (a.rank() != 3 || b.rank() != 3 || a.extent(0) != b.extent(0) ||
        a.extent(1) != b.extent(1) || a.extent(2) != b.extent(2))
        throw IoError(path_a + ", " + path_b + ": volumes must be cubic and equally sized");

    FscCurve curve = num_guard([&] { return fsc(a, b, voxel); });
    const double res = fsc_resolution(curve, threshold);

    CsvTable t;
    t.header = {"shell_radius", "correlation"};
    for (std::size_t s = 0; s < curve.correlation.size(); ++s)
        t.rows.push_back({curve.shell_radius[s], curve.correlation[s]});
    write_csv_table(curve_out, t);

    ctx.report = {{"n", curve.n},
                  {"voxel", voxel},
                  {"threshold", threshold},
                  {"resolved", !std::isinf(res)},
                  {"nyquist", 2.0 * voxel}};
    if (!std::isinf(res)) ctx.report["resolution"] = res;
    std::cout << "eval-fsc: resolution ";
    if (std::isinf(res))
        std::cout << "unresolved";
    else
        std::cout << res;
    std::cout << " (threshold " << threshold << ", Nyquist " << 2.0 * voxel << ")\n";
}

void cmd_eval_error(const json& cfg, RunCtx& ctx) {
    Cfg c(cfg, "$");
    const std::string vol_path = c.str("volume");
    const std::string ref_path = c.str("reference");
    std::vector<Rotation> grid;
    if (const json* g = c.child_opt("grid"))
        grid = parse_quadrature(*g, c.at("grid")).rotations;
    else
        grid = dense_quadrature().rotations;
    c.finish();

    RTensor u = read_volume_file(ctx, vol_path);
    RTensor v = read_volume_file(ctx, ref_path);
    Alignment a = num_guard([&] { return align_volumes(u, v, grid); });

    json rot = json::array();
    for (double x : a.rotation.m) rot.push_back(x);
    ctx.report = {{"rel_error", a.rel_error}, {"grid_index", a.grid_index}, {"rotation", rot}};
    std::cout << "eval-error: relative error " << a.rel_error << " at grid index "
              << a.grid_index << "\n";
}

// ---------------------------------------------------------------------------
// dispatch and rerun
// ---------------------------------------------------------------------------

using CmdFn = void (*)(const json&, RunCtx&);

const std::vector<std::pair<std::string, CmdFn>>& command_table() {
    static const std::vector<std::pair<std::string, CmdFn>> table = {
        {"simulate-mra", cmd_simulate_mra},     {"moments-mra", cmd_moments_mra},
        {"invert-spectral", cmd_invert_spectral}, {"make-dataset", cmd_make_dataset},
        {"train-encoder", cmd_train_encoder},   {"recon-mra", cmd_recon_mra},
        {"fit-volume", cmd_fit_volume},         {"simulate-cryoem", cmd_simulate_cryoem},
        {"moments-cryoem", cmd_moments_cryoem}, {"recon-cryoem", cmd_recon_cryoem},
        {"eval-fsc", cmd_eval_fsc},             {"eval-error", cmd_eval_error},
    };
    return table;
}

CmdFn find_command(const std::string& name) {
    for (const auto& [n, fn] : command_table())
        if (n == name) return fn;
    return nullptr;
}

void run_one(const std::string& name, const json& cfg, RunCtx& ctx) {
    CmdFn fn = find_command(name);
    if (!fn) throw SchemaError("unknown command: " + name);
    ctx.command = name;
    ctx.config = cfg;
    fs::create_directories(ctx.out_dir);
    set_worker_count(ctx.workers);
    fn(cfg, ctx);
    finalize_run(ctx);
}

void cmd_rerun(const std::string& manifest_path, const fs::path& out_dir, int workers_override) {
    Manifest m = io_guard("reading " + manifest_path,
                          [&] { return read_manifest(manifest_path); });
    if (!find_command(m.command))
        throw SchemaError("manifest names an unknown command: " + m.command);

    // inputs must be exactly what the original run saw
    for (const auto& s : m.inputs) {
        if (!fs::exists(s.path)) throw IoError("manifest input missing: " + s.path);
        const std::string h = sha256_file(s.path);
        if (h != s.sha256)
            throw NumError("manifest input changed since the original run: " + s.path);
    }

    RunCtx ctx;
    ctx.out_dir = out_dir;
    ctx.seed = m.seed;
    ctx.workers = workers_override > 0 ? workers_override : m.workers;
    run_one(m.command, m.config, ctx);

    // outputs are recorded relative to the output directory, so the replay
    // can be checked file by file
    std::size_t verified = 0;
    std::vector<std::string> mismatched;
    for (const auto& s : m.outputs) {
        const fs::path p = out_dir / s.path;
        if (!fs::exists(p)) {
            mismatched.push_back(s.path + " (missing)");
            continue;
        }
        if (sha256_file(p.string()) != s.sha256)
            mismatched.push_back(s.path);
        else
            ++verified;
    }
    if (!mismatched.empty()) {
        std::string msg = "rerun outputs differ from the manifest:";
        for (const auto& p : mismatched) msg += " " + p;
        throw NumError(msg);
    }
    std::cout << "rerun: " << m.command << " reproduced " << verified
              << " output files bit-identically\n";
}

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    try {
        json j;
        f >> j;
        if (!j.is_object()) throw SchemaError("$: config must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("config is not valid JSON: ") + e.what());
    }
}

std::string default_out_root() {
    const char* env = std::getenv("OMT_OUT_ROOT");
    return env && *env ? env : ".";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"orbit-moment toolkit"};
    app.require_subcommand(1);

    struct Common {
        std::string config;
        std::string out = default_out_root();
        std::uint64_t seed = 0;
        int workers = 1;
        CLI::App* sub = nullptr;
        CLI::Option* seed_opt = nullptr;
        CLI::Option* workers_opt = nullptr;
    };
    std::vector<Common> subs(command_table().size());
    for (std::size_t i = 0; i < command_table().size(); ++i) {
        const auto& [name, fn] = command_table()[i];
        Common& cm = subs[i];
        cm.sub = app.add_subcommand(name, "");
        cm.sub->add_option("--config", cm.config, "JSON config file")->required();
        cm.sub->add_option("--out", cm.out, "output directory");
        cm.seed_opt = cm.sub->add_option("--seed", cm.seed, "global seed");
        cm.workers_opt = cm.sub->add_option("--workers", cm.workers, "worker thread count");
    }

    std::string rerun_manifest;
    std::string rerun_out = default_out_root();
    int rerun_workers = 0;
    CLI::App* rerun = app.add_subcommand("rerun", "replay a manifest and verify its outputs");
    rerun->add_option("--manifest", rerun_manifest, "manifest file to replay")->required();
    rerun->add_option("--out", rerun_out, "output directory");
    rerun->add_option("--workers", rerun_workers,
                      "worker thread count (outputs must not depend on it)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    std::string command = "";
    RunCtx ctx;
    try {
        if (rerun->parsed()) {
            command = "rerun";
            ctx.out_dir = rerun_out;
            cmd_rerun(rerun_manifest, rerun_out, rerun_workers);
            return 0;
        }
        for (std::size_t i = 0; i < command_table().size(); ++i) {
            Common& cm = subs[i];
            if (!cm.sub->parsed()) continue;
            command = command_table()[i].first;
            json cfg = load_config(cm.config);
            ctx.out_dir = cm.out;
            // flags win over config fields; config fields win over defaults
            ctx.seed = cm.seed_opt->count() ? cm.seed
                       : cfg.contains("seed")
                           ? Cfg::as_uint(cfg["seed"], "$.seed")
                           : cm.seed;
            ctx.workers = int(cm.workers_opt->count() ? std::uint64_t(cm.workers)
                              : cfg.contains("workers")
                                  ? Cfg::as_uint(cfg["workers"], "$.workers")
                                  : std::uint64_t(cm.workers));
            cfg.erase("seed");
            cfg.erase("workers");
            run_one(command, cfg, ctx);
            return 0;
        }
        throw SchemaError("no subcommand given");
    } catch (const SchemaError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const NumError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        const fs::path dir = ctx.out_dir.empty() ? fs::path(".") : ctx.out_dir;
        std::error_code ec;
        fs::create_directories(dir, ec);
        const std::string diag =
            (dir / ((command.empty() ? "run" : command) + ".diagnostic.json")).string();
        std::ofstream f(diag);
        if (f) {
            json j = {{"command", command}, {"error", e.what()}};
            f << j.dump(2) << "\n";
            std::cerr << "diagnostic written to " << diag << "\n";
        }
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
