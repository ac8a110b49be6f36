#include "fedsa/config.hpp"

#include <toml.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace fedsa {

namespace {

std::string join_path(const std::string &prefix, std::string_view key) {
    return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

double as_number(const toml::node &node, const std::string &path) {
    if (auto i = node.as_integer())
        return double(i->get());
    if (auto f = node.as_floating_point())
        return f->get();
    throw ValidationError(path, "expected a number");
}

std::vector<double> as_number_list(const toml::node &node, const std::string &path) {
    if (node.is_number())
        return {as_number(node, path)};
    const auto *arr = node.as_array();
    if (arr == nullptr)
        throw ValidationError(path, "expected a number or an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < arr->size(); ++i)
        out.push_back(as_number(*arr->get(i), path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::vector<double>> as_vector_list(const toml::node &node, const std::string &path) {
    const auto *arr = node.as_array();
    if (arr == nullptr)
        throw ValidationError(path, "expected an array");
    if (arr->empty() || !arr->get(0)->is_array())
        return {as_number_list(node, path)};
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < arr->size(); ++i)
        out.push_back(as_number_list(*arr->get(i), path + "[" + std::to_string(i) + "]"));
    return out;
}

/// Table accessor that remembers which keys were read so unknown keys can
/// be rejected with their full path.
class Section {
public:
    Section(const toml::table &table, std::string path) : table_(table), path_(std::move(path)) {}

    const toml::node *node(std::string_view key) {
        seen_.insert(std::string(key));
        return table_.get(key);
    }

    std::string path(std::string_view key) const { return join_path(path_, key); }

    std::optional<double> number(std::string_view key) {
        const auto *n = node(key);
        if (n == nullptr)
            return std::nullopt;
        return as_number(*n, path(key));
    }

    std::optional<std::int64_t> integer(std::string_view key) {
        const auto *n = node(key);
        if (n == nullptr)
            return std::nullopt;
        if (auto i = n->as_integer())
            return i->get();
        throw ValidationError(path(key), "expected an integer");
    }

    std::optional<bool> boolean(std::string_view key) {
        const auto *n = node(key);
        if (n == nullptr)
            return std::nullopt;
        if (auto b = n->as_boolean())
            return b->get();
        throw ValidationError(path(key), "expected true or false");
    }

    std::optional<std::string> string(std::string_view key) {
        const auto *n = node(key);
        if (n == nullptr)
            return std::nullopt;
        if (auto s = n->as_string())
            return s->get();
        throw ValidationError(path(key), "expected a string");
    }

    const toml::table *table(std::string_view key) {
        const auto *n = node(key);
        if (n == nullptr)
            return nullptr;
        if (auto t = n->as_table())
            return t;
        throw ValidationError(path(key), "expected a table");
    }

    void finish() const {
        for (auto &&[k, v] : table_)
            if (!seen_.contains(std::string(k.str())))
                throw ValidationError(path(k.str()), "unknown key");
    }

private:
    const toml::table &table_;
    std::string path_;
    std::set<std::string> seen_;
};

ScheduleSpec parse_schedule(const toml::table &t, const std::string &path) {
    Section s(t, path);
    ScheduleSpec out;
    if (auto c = s.number("constant")) {
        out.constant = true;
        out.c = *c;
        out.delta = 0.0;
        if (t.contains("c") || t.contains("delta"))
            throw ValidationError(path, "use either {constant} or {c, delta}");
    } else {
        if (auto c = s.number("c"))
            out.c = *c;
        if (auto d = s.number("delta"))
            out.delta = *d;
    }
    s.finish();
    return out;
}

RegressionSpec parse_regression(Section &s) {
    RegressionSpec r;
    if (auto v = s.integer("d")) r.dim = *v;
    if (auto v = s.number("sigma_w")) r.sigma_w = *v;
    if (const auto *n = s.node("w_true")) r.w_true = as_vector_list(*n, s.path("w_true"));
    if (const auto *n = s.node("sigma_x")) r.sigma_x = as_number_list(*n, s.path("sigma_x"));
    if (const auto *n = s.node("sigma_x_choices"))
        r.sigma_x_choices = as_number_list(*n, s.path("sigma_x_choices"));
    if (auto v = s.number("snr_db")) r.snr_db = *v;
    if (auto v = s.integer("n_samples")) r.n_samples = *v;
    return r;
}

ClassificationSpec parse_classification(Section &s) {
    ClassificationSpec c;
    if (auto v = s.integer("classes")) c.classes = *v;
    if (auto v = s.integer("d")) c.dim = *v;
    if (auto v = s.number("sigma_x")) c.sigma_x = *v;
    if (auto v = s.number("class_radius")) c.class_radius = *v;
    if (auto v = s.integer("n_samples")) c.n_samples = *v;
    if (auto v = s.integer("test_samples")) c.test_samples = *v;
    if (auto v = s.string("partition")) {
        if (*v == "rare_class")
            c.partition = Partition::RareClass;
        else if (*v == "dominant")
            c.partition = Partition::Dominant;
        else
            throw ValidationError(s.path("partition"), "expected \"rare_class\" or \"dominant\"");
    }
    if (auto v = s.number("dominant_fraction")) c.dominant_fraction = *v;
    if (auto v = s.integer("rare_class")) c.rare_class = *v;
    return c;
}

std::string fmt_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEna") == std::string::npos)
        s += ".0";
    return s;
}

std::string fmt_list(const std::vector<double> &xs) {
    std::string s = "[";
    for (std::size_t i = 0; i < xs.size(); ++i)
        s += (i ? ", " : "") + fmt_number(xs[i]);
    return s + "]";
}

std::string fmt_nested(const std::vector<std::vector<double>> &xs) {
    std::string s = "[";
    for (std::size_t i = 0; i < xs.size(); ++i)
        s += (i ? ", " : "") + fmt_list(xs[i]);
    return s + "]";
}

const char *fmt_bool(bool b) { return b ? "true" : "false"; }

void write_schedule(std::ostream &out, const ScheduleSpec &s) {
    if (s.constant)
        out << "constant = " << fmt_number(s.c) << "\n";
    else
        out << "c = " << fmt_number(s.c) << "\ndelta = " << fmt_number(s.delta) << "\n";
}

} // namespace

std::vector<StepSizeSchedule<double>> ExperimentConfig::client_schedules() const {
    std::vector<StepSizeSchedule<double>> out;
    const auto L = static_cast<std::size_t>(clients);
    for (std::size_t i = 0; i < L; ++i) {
        const auto &spec = schedules.size() == 1 ? schedules.front() : schedules.at(i);
        out.push_back(spec.constant ? StepSizeSchedule<double>::constant(spec.c)
                                    : StepSizeSchedule<double>::tapering(spec.c, spec.delta,
                                                                         unsafe_delta));
    }
    return out;
}

bool ExperimentConfig::theory_supported() const {
    for (const auto &s : schedules)
        if (!s.constant && !StepSizeSchedule<double>::admissible_delta(s.delta))
            return false;
    return true;
}

void validate(const ExperimentConfig &cfg) {
    if (cfg.clients < 1)
        throw ValidationError("clients", "need at least one client");
    if (cfg.period < 2)
        throw ValidationError("aggregation_period", "N must be at least 2");
    if (cfg.batch_size < 1)
        throw ValidationError("batch_size", "m must be at least 1");
    if (cfg.rounds < 0)
        throw ValidationError("rounds", "must be non-negative");
    if (!(cfg.init_std >= 0.0))
        throw ValidationError("init_std", "must be non-negative");
    if (cfg.algorithm.tag == Algorithm::FedProx && !(cfg.algorithm.mu > 0.0))
        throw ValidationError("fedprox_mu", "must be positive");

    const auto L = static_cast<std::size_t>(cfg.clients);
    if (cfg.schedules.size() != 1 && cfg.schedules.size() != L)
        throw ValidationError("schedules", "give one shared schedule or one per client");
    bool any_constant = false, any_tapering = false;
    for (std::size_t i = 0; i < cfg.schedules.size(); ++i) {
        const auto &s = cfg.schedules[i];
        const std::string path =
            cfg.schedules.size() == 1 ? "schedule" : "schedules[" + std::to_string(i) + "]";
        try {
            if (s.constant)
                (void)StepSizeSchedule<double>::constant(s.c);
            else
                (void)StepSizeSchedule<double>::tapering(s.c, s.delta, cfg.unsafe_delta);
        } catch (const ValidationError &e) {
            std::string msg = e.what();
            msg = msg.substr(msg.find(": ") + 2);
            if (e.field() == "delta")
                msg += " (tapering needs 3/4 < delta <= 1; pass --unsafe-delta to explore)";
            throw ValidationError(path + "." + e.field(), msg);
        }
        (s.constant ? any_constant : any_tapering) = true;
    }
    if (any_constant && any_tapering)
        throw ValidationError("schedules", "cannot mix constant and tapering step sizes");
    if (any_constant && !cfg.algorithm.is_baseline())
        throw ValidationError("schedule.constant",
                              "constant step sizes are only allowed for baseline algorithms");

    const auto &d = cfg.diagnostics;
    if (!(d.tracking_horizon > 0.0))
        throw ValidationError("diagnostics.tracking_horizon", "must be positive");
    if (d.tracking_stride < 1)
        throw ValidationError("diagnostics.tracking_stride", "must be at least 1");
    if (!(d.ode_h_max > 0.0))
        throw ValidationError("diagnostics.ode_h_max", "must be positive");

    if (const auto *r = std::get_if<RegressionSpec>(&cfg.task)) {
        if (r->dim < 1)
            throw ValidationError("task.d", "must be at least 1");
        if (r->n_samples < 1)
            throw ValidationError("task.n_samples", "must be at least 1");
        if (r->w_true.empty() && !(r->sigma_w > 0.0))
            throw ValidationError("task.sigma_w", "must be positive");
        if (!r->w_true.empty() && r->w_true.size() != 1 && r->w_true.size() != L)
            throw ValidationError("task.w_true", "give one shared vector or one per client");
        for (std::size_t i = 0; i < r->w_true.size(); ++i)
            if (static_cast<std::int64_t>(r->w_true[i].size()) != r->dim)
                throw ValidationError("task.w_true[" + std::to_string(i) + "]",
                                      "length must equal d");
        if (r->sigma_x.size() != 1 && r->sigma_x.size() != L)
            throw ValidationError("task.sigma_x", "give one shared value or one per client");
        for (double s : r->sigma_x)
            if (!(s > 0.0))
                throw ValidationError("task.sigma_x", "must be positive");
        for (double s : r->sigma_x_choices)
            if (!(s > 0.0))
                throw ValidationError("task.sigma_x_choices", "must be positive");
        if (!std::isfinite(r->snr_db))
            throw ValidationError("task.snr_db", "must be finite");
    } else {
        const auto &c = std::get<ClassificationSpec>(cfg.task);
        if (c.classes < 2)
            throw ValidationError("task.classes", "need at least two classes");
        if (c.dim < 1)
            throw ValidationError("task.d", "must be at least 1");
        if (!(c.sigma_x > 0.0))
            throw ValidationError("task.sigma_x", "must be positive");
        if (!(c.class_radius > 0.0))
            throw ValidationError("task.class_radius", "must be positive");
        if (c.n_samples < 1)
            throw ValidationError("task.n_samples", "must be at least 1");
        if (c.test_samples < 1)
            throw ValidationError("task.test_samples", "must be at least 1");
        if (!(c.dominant_fraction >= 0.0 && c.dominant_fraction <= 1.0))
            throw ValidationError("task.dominant_fraction", "must lie in [0, 1]");
        if (c.rare_class < 0 || c.rare_class >= c.classes)
            throw ValidationError("task.rare_class", "must be a class index in 0..K-1");
        if (c.partition == Partition::RareClass && cfg.clients < 2)
            throw ValidationError("task.partition", "rare-class partition needs at least two clients");
        if (d.tracking_error || d.record_noise)
            throw ValidationError("diagnostics",
                                  "tracking error and noise recording need the regression task");
    }

    if (cfg.sweep) {
        const auto &p = cfg.sweep->parameter;
        if (p != "delta" && p != "snr_db" && p != "N" && p != "sigma_w" && p != "sigma_x-set")
            throw ValidationError("sweep.parameter",
                                  "expected one of delta, snr_db, N, sigma_w, sigma_x-set");
        if (cfg.sweep->values.empty())
            throw ValidationError("sweep.values", "need at least one value");
        for (const auto &v : cfg.sweep->values)
            if (v.empty() || (p != "sigma_x-set" && v.size() != 1))
                throw ValidationError("sweep.values", "each value must be a single number"
                                                      " (or a nonempty set for sigma_x-set)");
    }
}

ExperimentConfig parse_config(std::string_view text, bool allow_unsafe_delta) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error &e) {
        std::ostringstream msg;
        msg << e.description() << " (line " << e.source().begin.line << ")";
        throw ValidationError("<toml>", msg.str());
    }

    Section top(root, "");
    ExperimentConfig cfg;
    if (auto v = top.integer("seed")) {
        if (*v < 0)
            throw ValidationError("seed", "must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = top.integer("clients")) cfg.clients = *v;
    if (auto v = top.integer("aggregation_period")) cfg.period = *v;
    if (auto v = top.integer("batch_size")) cfg.batch_size = *v;
    if (auto v = top.integer("rounds")) cfg.rounds = *v;
    if (auto v = top.boolean("unsafe_delta")) cfg.unsafe_delta = *v;
    cfg.unsafe_delta = cfg.unsafe_delta || allow_unsafe_delta;

    const auto mu = top.number("fedprox_mu");
    if (auto name = top.string("algorithm")) {
        const auto tag = parse_algorithm(*name);
        if (!tag)
            throw ValidationError("algorithm",
                                  "expected one of proposed, fedavg, fedprox, fednova");
        cfg.algorithm.tag = *tag;
    }
    if (cfg.algorithm.tag == Algorithm::FedProx)
        cfg.algorithm.mu = mu.value_or(AlgorithmVariant::kDefaultProxMu);
    else if (mu)
        throw ValidationError("fedprox_mu", "only meaningful with algorithm = \"fedprox\"");

    const auto *single = top.table("schedule");
    const auto *many = top.node("schedules");
    if (single && many)
        throw ValidationError("schedules", "give either [schedule] or [[schedules]], not both");
    if (single)
        cfg.schedules = {parse_schedule(*single, "schedule")};
    if (many) {
        const auto *arr = many->as_array();
        if (arr == nullptr || arr->empty())
            throw ValidationError("schedules", "expected a nonempty array of tables");
        cfg.schedules.clear();
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const std::string path = "schedules[" + std::to_string(i) + "]";
            const auto *t = arr->get(i)->as_table();
            if (t == nullptr)
                throw ValidationError(path, "expected a table");
            cfg.schedules.push_back(parse_schedule(*t, path));
        }
    }

    if (const auto *task = top.table("task")) {
        Section s(*task, "task");
        const std::string kind = s.string("kind").value_or("regression");
        if (kind == "regression")
            cfg.task = parse_regression(s);
        else if (kind == "classification")
            cfg.task = parse_classification(s);
        else
            throw ValidationError("task.kind", "expected \"regression\" or \"classification\"");
        s.finish();
    }
    cfg.init_std = top.number("init_std").value_or(
        cfg.kind() == TaskKind::Regression ? kRegressionInitStd : kClassificationInitStd);

    if (const auto *diag = top.table("diagnostics")) {
        Section s(*diag, "diagnostics");
        auto &d = cfg.diagnostics;
        if (auto v = s.boolean("tracking_error")) d.tracking_error = *v;
        if (auto v = s.number("tracking_horizon")) d.tracking_horizon = *v;
        if (auto v = s.integer("tracking_stride")) d.tracking_stride = *v;
        if (auto v = s.number("ode_h_max")) d.ode_h_max = *v;
        if (auto v = s.boolean("record_noise")) d.record_noise = *v;
        if (auto v = s.boolean("dump_wbar")) d.dump_wbar = *v;
        if (auto v = s.boolean("dump_dataset")) d.dump_dataset = *v;
        if (auto v = s.boolean("full_batch")) d.full_batch = *v;
        s.finish();
    }

    if (const auto *sweep = top.table("sweep")) {
        Section s(*sweep, "sweep");
        SweepSpec spec;
        spec.parameter = s.string("parameter").value_or("");
        if (const auto *n = s.node("values")) {
            const auto *arr = n->as_array();
            if (arr == nullptr)
                throw ValidationError("sweep.values", "expected an array");
            for (std::size_t i = 0; i < arr->size(); ++i)
                spec.values.push_back(
                    as_number_list(*arr->get(i), "sweep.values[" + std::to_string(i) + "]"));
        }
        s.finish();
        cfg.sweep = std::move(spec);
    }

    top.finish();
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &path, bool allow_unsafe_delta) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), allow_unsafe_delta);
}

std::string dump_config(const ExperimentConfig &cfg) {
    std::ostringstream out;
    if (!cfg.theory_supported())
        out << "# theory-unsupported: a step-size exponent lies outside (0.75, 1]\n";
    out << "seed = " << cfg.seed << "\n"
        << "clients = " << cfg.clients << "\n"
        << "aggregation_period = " << cfg.period << "\n"
        << "batch_size = " << cfg.batch_size << "\n"
        << "rounds = " << cfg.rounds << "\n"
        << "algorithm = \"" << cfg.algorithm.name() << "\"\n";
    if (cfg.algorithm.tag == Algorithm::FedProx)
        out << "fedprox_mu = " << fmt_number(cfg.algorithm.mu) << "\n";
    out << "init_std = " << fmt_number(cfg.init_std) << "\n"
        << "unsafe_delta = " << fmt_bool(cfg.unsafe_delta) << "\n";

    if (cfg.schedules.size() == 1) {
        out << "\n[schedule]\n";
        write_schedule(out, cfg.schedules.front());
    } else {
        for (const auto &s : cfg.schedules) {
            out << "\n[[schedules]]\n";
            write_schedule(out, s);
        }
    }

    out << "\n[task]\n";
    if (const auto *r = std::get_if<RegressionSpec>(&cfg.task)) {
        out << "kind = \"regression\"\n"
            << "d = " << r->dim << "\n"
            << "sigma_w = " << fmt_number(r->sigma_w) << "\n";
        if (!r->w_true.empty())
            out << "w_true = " << fmt_nested(r->w_true) << "\n";
        out << "sigma_x = " << fmt_list(r->sigma_x) << "\n";
        if (!r->sigma_x_choices.empty())
            out << "sigma_x_choices = " << fmt_list(r->sigma_x_choices) << "\n";
        out << "snr_db = " << fmt_number(r->snr_db) << "\n"
            << "n_samples = " << r->n_samples << "\n";
    } else {
        const auto &c = std::get<ClassificationSpec>(cfg.task);
        out << "kind = \"classification\"\n"
            << "classes = " << c.classes << "\n"
            << "d = " << c.dim << "\n"
            << "sigma_x = " << fmt_number(c.sigma_x) << "\n"
            << "class_radius = " << fmt_number(c.class_radius) << "\n"
            << "n_samples = " << c.n_samples << "\n"
            << "test_samples = " << c.test_samples << "\n"
            << "partition = \""
            << (c.partition == Partition::RareClass ? "rare_class" : "dominant") << "\"\n"
            << "dominant_fraction = " << fmt_number(c.dominant_fraction) << "\n"
            << "rare_class = " << c.rare_class << "\n";
    }

    const auto &d = cfg.diagnostics;
    out << "\n[diagnostics]\n"
        << "tracking_error = " << fmt_bool(d.tracking_error) << "\n"
        << "tracking_horizon = " << fmt_number(d.tracking_horizon) << "\n"
        << "tracking_stride = " << d.tracking_stride << "\n"
        << "ode_h_max = " << fmt_number(d.ode_h_max) << "\n"
        << "record_noise = " << fmt_bool(d.record_noise) << "\n"
        << "dump_wbar = " << fmt_bool(d.dump_wbar) << "\n"
        << "dump_dataset = " << fmt_bool(d.dump_dataset) << "\n"
        << "full_batch = " << fmt_bool(d.full_batch) << "\n";

    if (cfg.sweep) {
        out << "\n[sweep]\n"
            << "parameter = \"" << cfg.sweep->parameter << "\"\n"
            << "values = " << fmt_nested(cfg.sweep->values) << "\n";
    }
    return out.str();
}

} // namespace fedsa
