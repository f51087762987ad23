#include "tic/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tic/errors.hpp"

namespace tic {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto t = trim(v);
    const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError(key + ": not a number: '" + v + "'");
    return out;
}

long long to_integer(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto t = trim(v);
    const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
    if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
    return out;
}

int to_int(const std::string& key, const std::string& v) {
    const long long x = to_integer(key, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError(key + ": out of range");
    return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F&& conv) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(conv(key, item));
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

// keys of [scenario] that only make sense for the LQ family
const std::map<std::string, Setter>& lq_keys() {
    static const std::map<std::string, Setter> m = {
        {"a", [](RunConfig& c, auto& k, auto& v) { c.lq.a = to_double(k, v); }},
        {"b", [](RunConfig& c, auto& k, auto& v) { c.lq.b = to_double(k, v); }},
        {"sigma", [](RunConfig& c, auto& k, auto& v) { c.lq.sigma = to_double(k, v); }},
        {"q", [](RunConfig& c, auto& k, auto& v) { c.lq.q = to_double(k, v); }},
        {"rho", [](RunConfig& c, auto& k, auto& v) { c.lq.rho = to_double(k, v); }},
        {"qT", [](RunConfig& c, auto& k, auto& v) { c.lq.qT = to_double(k, v); }},
        {"beta", [](RunConfig& c, auto& k, auto& v) { c.lq.beta = to_double(k, v); }},
        {"horizon", [](RunConfig& c, auto& k, auto& v) { c.lq.horizon = to_double(k, v); }},
        {"umax", [](RunConfig& c, auto& k, auto& v) { c.lq.umax = to_double(k, v); }},
        {"kernel", [](RunConfig& c, auto&, auto& v) { c.lq.kernel.kind = parse_kernel_kind(trim(v)); }},
        {"rate1", [](RunConfig& c, auto& k, auto& v) { c.lq.kernel.rate1 = to_double(k, v); }},
        {"rate2", [](RunConfig& c, auto& k, auto& v) { c.lq.kernel.rate2 = to_double(k, v); }},
        {"alpha", [](RunConfig& c, auto& k, auto& v) { c.lq.kernel.alpha = to_double(k, v); }},
        {"finite_controls", [](RunConfig& c, auto& k, auto& v) { c.lq.finite_controls = to_bool(k, v); }},
        {"finite_count", [](RunConfig& c, auto& k, auto& v) { c.lq.finite_count = to_int(k, v); }},
    };
    return m;
}

const std::map<std::string, std::map<std::string, Setter>>& section_keys() {
    static const std::map<std::string, std::map<std::string, Setter>> m = {
        {"scenario",
         {
             {"x0", [](RunConfig& c, auto& k, auto& v) { c.x0 = to_double(k, v); }},
             {"t0", [](RunConfig& c, auto& k, auto& v) { c.t0 = to_double(k, v); }},
         }},
        {"grid",
         {
             {"time_steps", [](RunConfig& c, auto& k, auto& v) { c.time_steps = to_int(k, v); }},
             {"x_lo", [](RunConfig& c, auto& k, auto& v) { c.x_lo = to_double(k, v); }},
             {"x_hi", [](RunConfig& c, auto& k, auto& v) { c.x_hi = to_double(k, v); }},
             {"nodes", [](RunConfig& c, auto& k, auto& v) { c.nodes = to_int(k, v); }},
             {"scheme", [](RunConfig& c, auto&, auto& v) { c.scheme = parse_scheme(trim(v)); }},
             {"cfl_safety", [](RunConfig& c, auto& k, auto& v) { c.cfl_safety = to_double(k, v); }},
             {"tolerance", [](RunConfig& c, auto& k, auto& v) { c.tolerance = to_double(k, v); }},
         }},
        {"monte_carlo",
         {
             {"n_paths", [](RunConfig& c, auto& k, auto& v) { c.n_paths = to_int(k, v); }},
             {"time_steps", [](RunConfig& c, auto& k, auto& v) { c.mc_time_steps = to_int(k, v); }},
             {"seed",
              [](RunConfig& c, auto& k, auto& v) {
                  const long long s = to_integer(k, v);
                  if (s < 0) throw ConfigError(k + ": must be nonnegative");
                  c.seed = static_cast<std::uint64_t>(s);
              }},
             {"degree", [](RunConfig& c, auto& k, auto& v) { c.degree = to_int(k, v); }},
             {"z_paths", [](RunConfig& c, auto& k, auto& v) { c.z_paths = to_int(k, v); }},
             {"output_paths", [](RunConfig& c, auto& k, auto& v) { c.output_paths = to_int(k, v); }},
             {"diagonal_mode",
              [](RunConfig& c, auto& k, auto& v) {
                  const auto t = trim(v);
                  if (t == "lagged")
                      c.diagonal_mode = DiagonalMode::lagged;
                  else if (t == "picard")
                      c.diagonal_mode = DiagonalMode::picard;
                  else
                      throw ConfigError(k + ": expected lagged or picard, got '" + v + "'");
              }},
         }},
        {"study",
         {
             {"eps_list", [](RunConfig& c, auto& k, auto& v) { c.eps_list = to_list<double>(k, v, to_double); }},
             {"n_list", [](RunConfig& c, auto& k, auto& v) { c.n_list = to_list<int>(k, v, to_int); }},
         }},
        {"diagonal",
         {
             {"picard_max", [](RunConfig& c, auto& k, auto& v) { c.picard_max = to_int(k, v); }},
             {"picard_tol", [](RunConfig& c, auto& k, auto& v) { c.picard_tol = to_double(k, v); }},
             {"damping", [](RunConfig& c, auto& k, auto& v) { c.damping = to_double(k, v); }},
             {"residual_rows", [](RunConfig& c, auto& k, auto& v) { c.residual_rows = to_int(k, v); }},
         }},
        {"run",
         {
             {"workers", [](RunConfig& c, auto& k, auto& v) { c.workers = to_int(k, v); }},
             {"verbose", [](RunConfig& c, auto& k, auto& v) { c.verbose = to_bool(k, v); }},
         }},
    };
    return m;
}

bool is_known_scenario(const std::string& id) {
    for (const auto& s : scenario_ids())
        if (s == id) return true;
    return false;
}

}  // namespace

void RunConfig::validate() const {
    if (!is_known_scenario(scenario)) throw ConfigError("unknown scenario '" + scenario + "'");
    if (time_steps < 1) throw ConfigError("grid.time_steps must be positive");
    if (nodes < 3) throw ConfigError("grid.nodes must be at least 3");
    if (!(x_lo < x_hi)) throw ConfigError("grid.x_lo must be below grid.x_hi");
    if (!(cfl_safety > 0.0)) throw ConfigError("grid.cfl_safety must be positive");
    if (!(tolerance > 0.0)) throw ConfigError("grid.tolerance must be positive");
    if (n_paths < 1) throw ConfigError("monte_carlo.n_paths must be positive");
    if (mc_time_steps < 1) throw ConfigError("monte_carlo.time_steps must be positive");
    if (degree < 1) throw ConfigError("monte_carlo.degree must be at least 1");
    if (z_paths < 0 || output_paths < 0) throw ConfigError("path counts must be nonnegative");
    if (picard_max < 1) throw ConfigError("diagonal.picard_max must be positive");
    if (!(picard_tol > 0.0)) throw ConfigError("diagonal.picard_tol must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("diagonal.damping must lie in (0, 1]");
    if (residual_rows < 1) throw ConfigError("diagonal.residual_rows must be positive");
    if (workers < 1) throw ConfigError("run.workers must be positive");
    const double T = is_lq_scenario(scenario) ? lq.horizon : 1.0;
    if (!(T > 0.0)) throw ConfigError("scenario.horizon must be positive");
    if (!(t0 >= 0.0 && t0 < T)) throw ConfigError("scenario.t0 must lie in [0, T)");
    for (double e : eps_list)
        if (!(e > 0.0 && e <= T - t0 + 1e-12)) throw ConfigError("study.eps_list entries must lie in (0, T - t0]");
    for (int n : n_list)
        if (n < 1) throw ConfigError("study.n_list entries must be positive");
    if (is_lq_scenario(scenario)) {
        try {
            lq.kernel.validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        if (!(lq.rho > 0.0) || !(lq.sigma > 0.0) || !(lq.umax > 0.0))
            throw ConfigError("scenario.rho, sigma and umax must be positive");
    }
}

ProblemSpec RunConfig::problem() const {
    if (scenario == "heat") return make_heat_problem();
    if (scenario == "martingale") return make_martingale_problem();
    return make_lq_problem(lq);
}

PdeConfig RunConfig::pde(std::ostream* log) const {
    PdeConfig p;
    p.tau = 0.0;
    p.time_steps = time_steps;
    p.space = SpatialGrid(x_lo, x_hi, nodes);
    p.scheme = scheme;
    p.cfl_safety = cfl_safety;
    p.tolerance = tolerance;
    p.workers = workers;
    p.log = log;
    return p;
}

McConfig RunConfig::monte_carlo() const {
    McConfig m;
    m.time_steps = mc_time_steps;
    m.n_paths = n_paths;
    m.seed = seed;
    m.basis.degree = degree;
    m.z_paths = z_paths;
    m.workers = workers;
    m.mode = diagonal_mode;
    return m;
}

DiagonalProblem RunConfig::diagonal_problem() const {
    if (is_lq_scenario(scenario)) return make_lq_diagonal_problem(lq);
    DiagonalProblem::Separable sep;
    sep.g0 = [](double, double, double, double) { return 0.0; };
    if (scenario == "heat")
        sep.h0 = [](double x) { return x * x; };
    else
        sep.h0 = [](double x) { return x; };
    sep.alpha = [](double) { return 0.0; };
    sep.kernel = DiscountKernel::exponential(0.0);
    sep.factorization = factorize_kernel(sep.kernel, 1.0);
    return make_separable_problem(
        scenario, 1.0, [](double, double, double, double) { return 0.0; },
        [](double, double, double) { return 1.0; }, std::move(sep));
}

DiagonalPathConfig RunConfig::diagonal_paths() const {
    DiagonalPathConfig d;
    d.n_paths = n_paths;
    d.seed = seed;
    d.workers = workers;
    d.basis.degree = degree;
    d.z_paths = z_paths;
    d.residual_rows = residual_rows;
    d.picard_max = picard_max;
    d.picard_tol = picard_tol;
    d.damping = damping;
    return d;
}

RunConfig parse_config(std::istream& is, const std::string& source) {
    // '#' comments are accepted alongside ';'
    std::stringstream clean;
    for (std::string line; std::getline(is, line);) {
        const auto t = trim(line);
        if (!t.empty() && t[0] == '#') continue;
        // the ini reader drops empty sections, so headers are checked here
        if (t.size() > 1 && t.front() == '[' && t.back() == ']') {
            const std::string name = trim(t.substr(1, t.size() - 2));
            if (!section_keys().count(name)) throw ConfigError(source + ": unknown section [" + name + "]");
        }
        clean << line << '\n';
    }
    pt::ptree tree;
    try {
        pt::read_ini(clean, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }

    RunConfig cfg;
    // scenario id first: it decides the defaults the other keys override
    if (auto sc = tree.get_child_optional("scenario"))
        if (auto id = sc->get_optional<std::string>("id")) cfg.scenario = trim(*id);
    if (!is_known_scenario(cfg.scenario)) throw ConfigError(source + ": unknown scenario '" + cfg.scenario + "'");
    if (is_lq_scenario(cfg.scenario)) cfg.lq = default_lq_params(cfg.scenario);

    const auto& known = section_keys();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError(source + ": key '" + section + "' outside of a section");
        const auto sit = known.find(section);
        if (sit == known.end()) throw ConfigError(source + ": unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            const std::string& value = node.data();
            if (section == "scenario" && key == "id") continue;
            if (section == "scenario" && lq_keys().count(key)) {
                if (!is_lq_scenario(cfg.scenario))
                    throw ConfigError(source + ": " + full + " does not apply to scenario " + cfg.scenario);
                lq_keys().at(key)(cfg, full, value);
                continue;
            }
            const auto kit = sit->second.find(key);
            if (kit == sit->second.end()) throw ConfigError(source + ": unknown key " + full);
            try {
                kit->second(cfg, full, value);
            } catch (const ConfigError& e) {
                throw ConfigError(source + ": " + e.what());
            }
        }
    }
    cfg.lq.id = cfg.scenario;
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in, path);
}

nlohmann::json config_to_json(const RunConfig& c) {
    using nlohmann::json;
    json sc = {{"id", c.scenario}, {"x0", c.x0}, {"t0", c.t0}};
    if (is_lq_scenario(c.scenario)) {
        sc["a"] = c.lq.a;
        sc["b"] = c.lq.b;
        sc["sigma"] = c.lq.sigma;
        sc["q"] = c.lq.q;
        sc["rho"] = c.lq.rho;
        sc["qT"] = c.lq.qT;
        sc["beta"] = c.lq.beta;
        sc["horizon"] = c.lq.horizon;
        sc["umax"] = c.lq.umax;
        sc["kernel"] = kernel_kind_name(c.lq.kernel.kind);
        sc["rate1"] = c.lq.kernel.rate1;
        sc["rate2"] = c.lq.kernel.rate2;
        sc["alpha"] = c.lq.kernel.alpha;
        sc["finite_controls"] = c.lq.finite_controls;
        sc["finite_count"] = c.lq.finite_count;
    }
    return json{
        {"scenario", sc},
        {"grid",
         {{"time_steps", c.time_steps},
          {"x_lo", c.x_lo},
          {"x_hi", c.x_hi},
          {"nodes", c.nodes},
          {"scheme", scheme_name(c.scheme)},
          {"cfl_safety", c.cfl_safety},
          {"tolerance", c.tolerance}}},
        {"monte_carlo",
         {{"n_paths", c.n_paths},
          {"time_steps", c.mc_time_steps},
          {"seed", c.seed},
          {"degree", c.degree},
          {"z_paths", c.z_paths},
          {"diagonal_mode", c.diagonal_mode == DiagonalMode::lagged ? "lagged" : "picard"},
          {"output_paths", c.output_paths}}},
        {"study", {{"eps_list", c.eps_list}, {"n_list", c.n_list}}},
        {"diagonal",
         {{"picard_max", c.picard_max},
          {"picard_tol", c.picard_tol},
          {"damping", c.damping},
          {"residual_rows", c.residual_rows}}},
        {"run", {{"workers", c.workers}, {"verbose", c.verbose}}},
    };
}

}  // namespace tic
