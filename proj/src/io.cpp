#include "pwni/io.hpp"

#include "json.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace pwni {

namespace {

using nlohmann::json;

// Read access to one JSON object that remembers which keys were used.
class Section {
public:
    Section(const json& j, std::string path, ParseMode mode, std::vector<std::string>& warnings)
        : j_(j), path_(std::move(path)), mode_(mode), warnings_(warnings) {
        if (!j_.is_object()) {
            throw SpecError(path_ + " must be an object");
        }
    }
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) {
            return;
        }
        for (const auto& [key, value] : j_.items()) {
            if (used_.count(key) == 0) {
                const std::string msg = "unknown key " + path_ + "." + key;
                if (mode_ == ParseMode::strict) {
                    throw SpecError(msg);
                }
                warnings_.push_back(msg);
            }
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    [[nodiscard]] Section sub(const std::string& key) {
        if (!has(key)) {
            throw SpecError("missing section " + name(key));
        }
        used_.insert(key);
        return {j_.at(key), name(key), mode_, warnings_};
    }

    template <class T>
    [[nodiscard]] T get(const std::string& key) {
        if (!has(key)) {
            throw SpecError("missing key " + name(key));
        }
        used_.insert(key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw SpecError("wrong type for " + name(key));
        }
    }

    template <class T>
    void read(const std::string& key, T& target) {
        if (has(key)) {
            target = get<T>(key);
        }
    }

    [[nodiscard]] std::string name(const std::string& key) const { return path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    ParseMode mode_;
    std::vector<std::string>& warnings_;
    std::set<std::string> used_;
};

MaterialParams parse_material(Section s, double tape_width, double tape_thickness, int n_parallel) {
    MaterialParams m;
    if (s.has("jc0") == s.has("coil_ic")) {
        throw SpecError("coil.material needs exactly one of jc0 or coil_ic");
    }
    if (s.has("jc0")) {
        m.jc0 = s.get<double>("jc0");
    } else {
        m.jc0 = jc0_from_tape_ic(s.get<double>("coil_ic") / n_parallel, tape_width, tape_thickness);
    }
    s.read("n_value", m.n_value);
    s.read("e0", m.e0);
    s.read("kim_m", m.kim_m);
    s.read("kim_alpha", m.kim_alpha);
    s.read("kim_b0", m.kim_b0);
    if (!(m.n_value > 1.0) || !(m.e0 > 0.0) || !(m.jc0 > 0.0) || !(m.kim_b0 > 0.0) ||
        !(m.kim_alpha >= 0.0) || !(m.kim_m >= 0.0 && m.kim_m <= 1.0)) {
        throw SpecError("coil.material out of range");
    }
    return m;
}

CoilSpec parse_coil(Section s) {
    CoilSpec c;
    c.n_parallel = s.get<int>("n_parallel");
    c.n_turns = s.get<int>("n_turns");
    c.inner_radius = s.get<double>("inner_radius");
    c.tape_width = s.get<double>("tape_width");
    c.tape_thickness = s.get<double>("tape_thickness");
    s.read("axial_center", c.axial_center);
    if (s.has("radial_pitch") == s.has("outer_radius")) {
        throw SpecError("coil needs exactly one of radial_pitch or outer_radius");
    }
    if (s.has("radial_pitch")) {
        c.radial_pitch = s.get<double>("radial_pitch");
    } else {
        c.radial_pitch = pitch_from_diameters(2.0 * c.inner_radius, 2.0 * s.get<double>("outer_radius"),
                                              c.n_parallel, c.n_turns);
    }
    c.material = parse_material(s.sub("material"), c.tape_width, c.tape_thickness, c.n_parallel);
    {
        Section j = s.sub("joints");
        c.joints.input = j.get<std::vector<double>>("input");
        c.joints.output = j.get<std::vector<double>>("output");
        j.read("closed_loop_delta", c.joints.closed_loop_delta);
    }
    const int contact_keys = static_cast<int>(s.has("contact_resistivity")) +
                             static_cast<int>(s.has("contact_resistance_total")) +
                             static_cast<int>(s.has("insulated"));
    if (contact_keys != 1) {
        throw SpecError("coil needs exactly one of contact_resistivity, contact_resistance_total, insulated");
    }
    if (s.has("contact_resistivity")) {
        c.contact_resistivity = s.get<double>("contact_resistivity");
    } else if (s.has("contact_resistance_total")) {
        c.contact_resistivity = contact_resistivity_from_total(s.get<double>("contact_resistance_total"), c);
    } else if (!s.get<bool>("insulated")) {
        throw SpecError("coil.insulated = false needs a contact resistance");
    }
    return validate_spec(c);
}

DriveProfile parse_profile(Section& s) {
    if (s.has("profile") == s.has("ramp")) {
        throw SpecError("scenario needs exactly one of profile or ramp");
    }
    DriveProfile p;
    if (s.has("profile")) {
        for (const auto& pt : s.get<std::vector<std::array<double, 2>>>("profile")) {
            p.points.emplace_back(pt[0], pt[1]);
        }
    } else {
        Section r = s.sub("ramp");
        const double rate = r.get<double>("rate");
        const double peak = r.get<double>("peak");
        double hold = 0.0;
        r.read("hold", hold);
        if (!(rate > 0.0) || !(peak > 0.0) || !(hold >= 0.0)) {
            throw SpecError("scenario.ramp needs rate > 0, peak > 0, hold >= 0");
        }
        p = ramp_and_hold(rate, peak, hold);
    }
    validate_profile(p);
    return p;
}

BackgroundField parse_background(Section s, const CoilSpec& coil) {
    BackgroundField f;
    f.axial_center = coil.axial_center;
    f.radius = s.get<double>("radius");
    f.offset = s.get<double>("offset");
    f.amplitude = s.get<double>("amplitude");
    f.frequency = s.get<double>("frequency");
    s.read("t_start", f.t_start);
    if (s.has("turns") == s.has("calibrate")) {
        throw SpecError("scenario.background needs exactly one of turns or calibrate");
    }
    if (s.has("turns")) {
        f.turns = s.get<double>("turns");
    } else {
        Section c = s.sub("calibrate");
        const double target = c.get<double>("peak_br");
        double r = 0.5 * (coil.inner_radius + coil.outer_radius());
        double z = coil.axial_center;
        c.read("probe_r", r);
        c.read("probe_z", z);
        f.turns = calibrate_background_turns(f, r, z, target);
    }
    validate_background(f);
    return f;
}

Scenario parse_scenario(Section s, const CoilSpec& coil) {
    Scenario sc;
    sc.profile = parse_profile(s);
    sc.t_end = s.get<double>("t_end");
    if (s.has("closed_loop")) {
        Section c = s.sub("closed_loop");
        ClosedLoopConfig cl;
        cl.t0 = c.get<double>("t0");
        cl.r_cl = c.get<double>("r_cl");
        sc.closed_loop = cl;
    }
    if (s.has("background")) {
        sc.background = parse_background(s.sub("background"), coil);
    }
    validate_scenario(sc);
    return sc;
}

SolverConfig parse_solver(Section s) {
    SolverConfig cfg;
    s.read("dt", cfg.dt);
    cfg.dt_max = cfg.dt;
    s.read("dt_min", cfg.dt_min);
    s.read("dt_max", cfg.dt_max);
    s.read("newton_tol", cfg.newton_tol);
    s.read("kcl_tol", cfg.kcl_tol);
    s.read("max_newton_iters", cfg.max_newton_iters);
    s.read("field_dependent_jc", cfg.field_dependent_jc);
    if (s.has("jacobian")) {
        const auto mode = s.get<std::string>("jacobian");
        if (mode == "analytic") {
            cfg.jacobian_mode = JacobianMode::analytic;
        } else if (mode == "finite_difference_check") {
            cfg.jacobian_mode = JacobianMode::finite_difference_check;
        } else {
            throw SpecError("solver.jacobian must be analytic or finite_difference_check");
        }
    }
    validate_solver(cfg);
    return cfg;
}

MultiscaleConfig parse_multiscale(Section s) {
    MultiscaleConfig m;
    s.read("boundary_turns", m.boundary_turns);
    s.read("interior_stride", m.interior_stride);
    s.read("penalty", m.penalty);
    s.read("coarse_elements", m.coarse_elements);
    if (s.has("mode")) {
        const auto mode = s.get<std::string>("mode");
        if (mode == "edge") {
            m.mode = PenaltyMode::edge;
        } else if (mode == "distributed") {
            m.mode = PenaltyMode::distributed;
        } else {
            throw SpecError("multiscale.mode must be edge or distributed");
        }
    }
    validate_multiscale(m);
    return m;
}

}  // namespace

RunConfig parse_config(const std::string& text, ParseMode mode) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw SpecError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Section top(root, "config", mode, cfg.warnings);
    top.read("name", cfg.name);
    cfg.setup.coil = parse_coil(top.sub("coil"));
    {
        Section m = top.sub("mesh");
        cfg.setup.elements_per_width = m.get<int>("elements_per_width");
        if (cfg.setup.elements_per_width < 2) {
            throw SpecError("mesh.elements_per_width >= 2");
        }
    }
    if (top.has("multiscale")) {
        cfg.setup.multiscale = parse_multiscale(top.sub("multiscale"));
    }
    cfg.setup.scenario = parse_scenario(top.sub("scenario"), cfg.setup.coil);
    if (top.has("solver")) {
        cfg.setup.solver = parse_solver(top.sub("solver"));
    }
    if (top.has("kernel")) {
        Section k = top.sub("kernel");
        k.read("field_points", cfg.setup.kernel.field_points);
        k.read("near_factor", cfg.setup.kernel.near_factor);
        k.read("memory_cap_bytes", cfg.setup.kernel.memory_cap_bytes);
        k.read("threads", cfg.setup.kernel.threads);
        if (cfg.setup.kernel.field_points != 1 && cfg.setup.kernel.field_points != 2) {
            throw SpecError("kernel.field_points must be 1 or 2");
        }
    }
    if (top.has("outputs")) {
        Section o = top.sub("outputs");
        o.read("cadence", cfg.outputs.cadence);
        o.read("snapshots", cfg.outputs.snapshots);
        o.read("snapshot_cadence", cfg.outputs.snapshot_cadence);
        o.read("strip_losses", cfg.outputs.strip_losses);
        if (o.has("directory")) {
            cfg.output_dir = o.get<std::string>("directory");
        }
        if (!(cfg.outputs.cadence >= 0.0) || !(cfg.outputs.snapshot_cadence >= 0.0)) {
            throw SpecError("outputs cadences >= 0");
        }
    }
    if (top.has("oracle")) {
        Section o = top.sub("oracle");
        o.read("filaments_per_strip", cfg.oracle.filaments_per_strip);
        o.read("power_law", cfg.oracle.power_law);
        o.read("dt", cfg.oracle_dt);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, ParseMode mode) {
    std::ifstream in(path);
    if (!in) {
        throw SpecError("cannot open config " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config(buf.str(), mode);
    if (cfg.name.empty()) {
        cfg.name = path.stem().string();
    }
    return cfg;
}

void write_csv(std::ostream& out, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out << (c ? "," : "") << columns[c];
    }
    out << '\n';
    char buf[32];
    for (const auto& row : rows) {
        if (row.size() != columns.size()) {
            throw std::logic_error("row width does not match the header");
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.12e", row[c]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const TimeSeriesRecord& record) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    write_csv(out, record.columns, record.rows);
}

namespace {

constexpr char kSnapMagic[8] = {'P', 'W', 'N', 'I', 'S', 'N', 'A', 'P'};

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) {
        throw std::runtime_error("truncated snapshot stream");
    }
    return v;
}

}  // namespace

void write_snapshots(std::ostream& out, const SnapshotFile& file) {
    for (const auto& f : file.frames) {
        out.write(kSnapMagic, sizeof kSnapMagic);
        put(out, kSnapshotVersion);
        put(out, file.kind);
        put(out, file.mesh_hash);
        put(out, f.time);
        put(out, static_cast<std::uint64_t>(f.j.size()));
        out.write(reinterpret_cast<const char*>(f.j.data()),
                  static_cast<std::streamsize>(f.j.size() * sizeof(double)));
    }
}

SnapshotFile read_snapshots(std::istream& in) {
    SnapshotFile file;
    bool first = true;
    while (in.peek() != std::char_traits<char>::eof()) {
        char magic[8];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, kSnapMagic, sizeof magic) != 0) {
            throw std::runtime_error("not a snapshot frame");
        }
        if (take<std::uint32_t>(in) != kSnapshotVersion) {
            throw std::runtime_error("unsupported snapshot version");
        }
        const auto kind = take<std::uint32_t>(in);
        if (kind != kSnapshotKindJ && kind != kSnapshotKindState) {
            throw std::runtime_error("unsupported snapshot kind");
        }
        const auto hash = take<std::uint64_t>(in);
        if (!first && (hash != file.mesh_hash || kind != file.kind)) {
            throw std::runtime_error("snapshot frames from different meshes or kinds");
        }
        file.mesh_hash = hash;
        file.kind = kind;
        first = false;
        JSnapshot f;
        f.time = take<double>(in);
        const auto n = take<std::uint64_t>(in);
        f.j.resize(n);
        in.read(reinterpret_cast<char*>(f.j.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) {
            throw std::runtime_error("truncated snapshot stream");
        }
        file.frames.push_back(std::move(f));
    }
    return file;
}

SnapshotFile state_dump(const SimState& state, std::uint64_t mesh_hash) {
    SnapshotFile f;
    f.mesh_hash = mesh_hash;
    f.kind = kSnapshotKindState;
    f.frames.push_back({state.time, {state.x.data(), state.x.data() + state.x.size()}});
    f.frames.push_back({state.time, {state.jc.data(), state.jc.data() + state.jc.size()}});
    return f;
}

void write_snapshots(const std::filesystem::path& path, const SnapshotFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    write_snapshots(out, file);
}

SnapshotFile read_snapshots(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    return read_snapshots(in);
}

}  // namespace pwni
