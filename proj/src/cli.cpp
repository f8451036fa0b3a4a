#include "cbn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cbn/bootstrap.hpp"
#include "cbn/cohort.hpp"
#include "cbn/error.hpp"
#include "cbn/eval.hpp"
#include "cbn/io.hpp"
#include "cbn/params.hpp"
#include "cbn/service.hpp"
#include "json.hpp"

namespace cbn::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

/// A flag value of the wrong type; reported like a CLI parse failure.
class UsageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Flag values of one subcommand, kept as text so they can be written to the
/// manifest and replayed verbatim.
struct Options {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::string out;
    std::size_t threads = 1;

    const std::string& get(const std::string& key) const { return values.at(key); }
    bool has(const std::string& key) const { return !values.at(key).empty(); }
    bool flag(const std::string& key) const { return flags.at(key); }

    double real(const std::string& key) const {
        try {
            std::size_t used = 0;
            const double v = std::stod(get(key), &used);
            if (used != get(key).size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::logic_error&) {
            throw UsageError("--" + key + " expects a number, got '" + get(key) + "'");
        }
    }
    std::uint64_t integer(const std::string& key) const {
        const auto& s = get(key);
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("--" + key + " expects a nonnegative integer, got '" + s + "'");
        }
        try {
            return std::stoull(s);
        } catch (const std::out_of_range&) {
            throw UsageError("--" + key + " is out of range");
        }
    }
};

class Manifest {
public:
    Manifest(std::string command, const Options& options, std::string out_dir)
        : command_(std::move(command)), options_(options), out_dir_(std::move(out_dir)) {}

    void input(const std::string& key, const std::string& path) {
        inputs_.push_back({{"flag", key}, {"path", path}, {"hash", file_hash(path)}});
    }

    void output(const std::string& name, const std::string& contents) {
        write_file((fs::path(out_dir_) / name).string(), contents);
        outputs_[name] = fnv1a_hex(contents);
    }

    ordered_json& metrics() { return metrics_; }

    void write() {
        ordered_json j;
        j["tool"] = "cbn";
        j["manifest_version"] = kManifestVersion;
        j["command"] = command_;
        ordered_json args = ordered_json::object();
        for (const auto& [k, v] : options_.values) args[k] = v;
        j["args"] = args;
        ordered_json flags = ordered_json::object();
        for (const auto& [k, v] : options_.flags) flags[k] = v;
        j["flags"] = flags;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["metrics"] = metrics_;
        write_file((fs::path(out_dir_) / "manifest.json").string(), j.dump(2) + "\n");
    }

private:
    std::string command_;
    const Options& options_;
    std::string out_dir_;
    ordered_json inputs_ = ordered_json::array();
    ordered_json outputs_ = ordered_json::object();
    ordered_json metrics_ = ordered_json::object();
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

/// Variables from a table header when no schema is given: states are the
/// distinct observed labels in lexicographic order.
std::vector<Variable> infer_variables(const std::string& path, const std::string& missing_token) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty data file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line, 1);
    std::vector<std::set<std::string>> labels(header.size());
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line, n);
        if (cells.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " cells", n);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].empty() || cells[c] == "NA" || cells[c] == missing_token) continue;
            labels[c].insert(cells[c]);
        }
    }
    std::vector<Variable> vars;
    for (std::size_t c = 0; c < header.size(); ++c) {
        vars.push_back(Variable{header[c], std::vector<std::string>(labels[c].begin(), labels[c].end())});
    }
    validate_variables(vars);
    return vars;
}

struct Inputs {
    std::vector<Variable> variables;
    PriorKnowledge knowledge;
};

Inputs load_schema_and_knowledge(const Options& o, Manifest& m, const std::string& data_key) {
    Inputs in;
    if (o.has("schema")) {
        m.input("schema", o.get("schema"));
        const auto schema = read_schema(o.get("schema"));
        in.variables = schema.variables();
        in.knowledge = schema.knowledge();
    } else {
        in.variables = infer_variables(o.get(data_key), o.get("missing-token"));
    }
    if (o.values.contains("knowledge") && o.has("knowledge")) {
        m.input("knowledge", o.get("knowledge"));
        in.knowledge = merge_knowledge(in.knowledge, read_knowledge(o.get("knowledge")));
    }
    std::vector<std::string> names;
    for (const auto& v : in.variables) names.push_back(v.name);
    in.knowledge.check_nodes(names);
    return in;
}

Dataset load_data(const Options& o, Manifest& m, const std::string& key, const std::vector<Variable>& vars) {
    m.input(key, o.get(key));
    return read_table(o.get(key), vars, o.get("missing-token"));
}

SemConfig sem_config(const Options& o) {
    SemConfig sem;
    sem.em.ess = o.real("ess");
    sem.em.max_iterations = o.integer("max-em-iter");
    sem.em.tolerance = o.real("tol");
    sem.max_sem_iterations = o.integer("max-sem-iter");
    sem.validate();
    return sem;
}

std::string json_number_or_null(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

// ---------------------------------------------------------------------------

void cmd_discover(const Options& o, std::ostream& err) {
    Manifest m("discover", o, o.out);
    const auto in = load_schema_and_knowledge(o, m, "data");
    const auto data = load_data(o, m, "data", in.variables);

    BootstrapConfig cfg;
    cfg.n = o.integer("n");
    cfg.m = o.integer("m");
    cfg.seed = o.integer("seed");
    cfg.threads = o.threads;
    cfg.sem = sem_config(o);
    const double lambda = o.real("lambda");

    err << "cbn: discover: " << cfg.n << " bootstrap(s) over " << data.rows() << " records\n";
    auto learned = learn_cbn(data, in.knowledge, cfg, lambda);
    err << "cbn: discover: average graph has " << learned.network.dag().edge_count() << " edge(s)\n";

    m.output("confidence.tsv", format_confidence(learned.confidence));
    m.output("strengths.tsv", format_strengths(learned.confidence));
    m.output("graph.txt", format_edge_list(learned.network.dag()));
    m.output("model.json", format_model(learned.network));

    auto& metrics = m.metrics();
    metrics["records"] = data.rows();
    metrics["missing_cells"] = data.missing_count();
    metrics["edges"] = learned.network.dag().edge_count();
    metrics["max_confidence"] = learned.confidence.max_entry();
    ordered_json ties = ordered_json::array();
    for (const auto& e : learned.average.dropped_ties) ties.push_back(to_string(e));
    metrics["dropped_ties"] = ties;
    ordered_json cycles = ordered_json::array();
    for (const auto& e : learned.average.skipped_cycles) cycles.push_back(to_string(e));
    metrics["skipped_cycles"] = cycles;
    metrics["em_iterations"] = learned.em.iterations;
    metrics["em_converged"] = learned.em.converged;
    metrics["log_likelihood"] = learned.em.log_likelihood.back();
    m.write();
}

void cmd_fit(const Options& o, std::ostream& err) {
    Manifest m("fit", o, o.out);
    const auto in = load_schema_and_knowledge(o, m, "data");
    const auto data = load_data(o, m, "data", in.variables);
    m.input("graph", o.get("graph"));
    std::vector<std::string> names;
    for (const auto& v : in.variables) names.push_back(v.name);
    const Dag dag(names, read_edge_list(o.get("graph")));
    if (!satisfies(dag, in.knowledge)) throw ConstraintViolated("the graph violates the prior knowledge");

    EmConfig cfg;
    cfg.ess = o.real("ess");
    cfg.max_iterations = o.integer("max-em-iter");
    cfg.tolerance = o.real("tol");
    cfg.seed = o.integer("seed");
    const auto& init = o.get("init");
    if (init == "uniform") {
        cfg.init = EmInit::Uniform;
    } else if (init == "random") {
        cfg.init = EmInit::Random;
    } else {
        throw ValidationError("--init must be 'uniform' or 'random'");
    }
    err << "cbn: fit: EM on " << dag.edge_count() << " edge(s), " << data.rows() << " records\n";
    const auto em = em_fit(dag, data, cfg);
    const CausalBayesianNetwork bn(dag, in.variables, em.cpts);
    m.output("model.json", format_model(bn));
    auto& metrics = m.metrics();
    metrics["records"] = data.rows();
    metrics["iterations"] = em.iterations;
    metrics["converged"] = em.converged;
    metrics["log_likelihood"] = em.log_likelihood.back();
    metrics["trace"] = em.trace;
    m.write();
}

void cmd_predict(const Options& o, std::ostream& err) {
    Manifest m("predict", o, o.out);
    m.input("model", o.get("model"));
    const auto bn = read_model(o.get("model"));
    const auto data = load_data(o, m, "data", bn.variables());
    const auto& target = o.get("target");
    const auto& positive = o.get("positive");
    const auto scores = predict_risk(bn, data, target, positive);
    const auto labels = binary_labels(data, target, positive);
    m.output("scores.csv", format_scores(scores, labels));
    ordered_json undefined = ordered_json::array();
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!scores[i]) undefined.push_back(i);
    err << "cbn: predict: " << scores.size() << " record(s), " << undefined.size() << " undefined\n";
    m.metrics()["records"] = scores.size();
    m.metrics()["undefined_rows"] = undefined;
    m.write();
}

void cmd_eval(const Options& o, std::ostream& err) {
    Manifest m("eval", o, o.out);
    m.input("scores", o.get("scores"));
    const auto rows = parse_scores(read_file(o.get("scores")));
    std::vector<std::optional<double>> scores;
    std::vector<std::optional<int>> labels;
    for (const auto& r : rows) {
        scores.push_back(r.score);
        labels.push_back(r.label);
    }
    const auto set = pair_scores(scores, labels);
    const auto roc = roc_auc(set.scores, set.labels);
    const auto ci = auc_bootstrap_ci(set.scores, set.labels, o.integer("resamples"), o.real("level"),
                                     o.integer("seed"));
    err << "cbn: eval: AUC " << format_double(roc.auc) << " on " << set.scores.size() << " scored record(s)\n";

    ordered_json report;
    report["records"] = rows.size();
    report["scored"] = set.scores.size();
    report["undefined_scores"] = set.undefined_scores;
    report["missing_labels"] = set.missing_labels;
    report["positives"] = std::count(set.labels.begin(), set.labels.end(), 1);
    report["negatives"] = std::count(set.labels.begin(), set.labels.end(), 0);
    report["auc"] = roc.auc;
    report["ci"] = {{"method", "percentile bootstrap"},
                    {"level", o.real("level")},
                    {"lower", ci.lower},
                    {"upper", ci.upper},
                    {"resamples", ci.resamples},
                    {"degenerate_resamples", ci.degenerate}};
    ordered_json points = ordered_json::array();
    std::string tsv = "threshold\tfpr\ttpr\ttp\tfp\ttn\tfn\n";
    for (const auto& p : roc.curve.points) {
        const bool inf = std::isinf(p.threshold);
        ordered_json point;
        point["threshold"] = inf ? ordered_json("+inf") : ordered_json(p.threshold);
        point["fpr"] = p.fpr;
        point["tpr"] = p.tpr;
        point["confusion"] = {{"tp", p.cm.tp}, {"fp", p.cm.fp}, {"tn", p.cm.tn}, {"fn", p.cm.fn}};
        const auto sens = sensitivity(p.cm);
        const auto spec = specificity(p.cm);
        point["sensitivity"] = sens ? ordered_json(*sens) : ordered_json(nullptr);
        point["specificity"] = spec ? ordered_json(*spec) : ordered_json(nullptr);
        points.push_back(std::move(point));
        tsv += (inf ? std::string("inf") : format_double(p.threshold)) + "\t" + format_double(p.fpr) + "\t" +
               format_double(p.tpr) + "\t" + std::to_string(p.cm.tp) + "\t" + std::to_string(p.cm.fp) + "\t" +
               std::to_string(p.cm.tn) + "\t" + std::to_string(p.cm.fn) + "\n";
    }
    report["roc"] = points;
    m.output("report.json", report.dump(2) + "\n");
    m.output("roc.tsv", tsv);
    m.metrics()["auc"] = roc.auc;
    m.metrics()["ci_lower"] = ci.lower;
    m.metrics()["ci_upper"] = ci.upper;
    m.write();
}

std::vector<GridConfig> parse_grid(const std::string& text, std::uint64_t default_seed) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("grid file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("grid file must hold a JSON object");
    GridConfig base;
    base.seed = default_seed;
    auto apply = [](GridConfig& c, const std::string& key, const nlohmann::json& v) {
        if (!v.is_number()) throw ParseError("grid value for '" + key + "' must be a number");
        auto whole = [&] {
            if (!v.is_number_unsigned()) throw ParseError("grid value for '" + key + "' must be a nonnegative integer");
            return v.get<std::uint64_t>();
        };
        if (key == "n") c.n = whole();
        else if (key == "m") c.m = whole();
        else if (key == "lambda") c.lambda = v.get<double>();
        else if (key == "ess") c.ess = v.get<double>();
        else if (key == "max_em_iterations") c.max_em_iterations = whole();
        else if (key == "tolerance") c.tolerance = v.get<double>();
        else if (key == "max_sem_iterations") c.max_sem_iterations = whole();
        else if (key == "seed") c.seed = whole();
        else throw ParseError("unknown grid key '" + key + "'");
    };
    std::vector<GridConfig> grid;
    if (j.contains("configs")) {
        if (j.size() != 1 || !j["configs"].is_array()) throw ParseError("'configs' must be the only key and an array");
        for (const auto& c : j["configs"]) {
            if (!c.is_object()) throw ParseError("each config must be an object");
            GridConfig cfg = base;
            for (auto it = c.begin(); it != c.end(); ++it) apply(cfg, it.key(), it.value());
            grid.push_back(cfg);
        }
    } else {
        // Cartesian product; the first key listed here varies slowest.
        static const char* kAxes[] = {"n", "m", "lambda", "ess", "max_em_iterations", "tolerance",
                                      "max_sem_iterations", "seed"};
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::find(std::begin(kAxes), std::end(kAxes), it.key()) == std::end(kAxes)) {
                throw ParseError("unknown grid key '" + it.key() + "'");
            }
            if (!it.value().is_array() || it.value().empty()) {
                throw ParseError("grid axis '" + it.key() + "' must be a nonempty array");
            }
        }
        grid.push_back(base);
        for (const char* axis : kAxes) {
            if (!j.contains(axis)) continue;
            std::vector<GridConfig> next;
            for (const auto& g : grid) {
                for (const auto& v : j[axis]) {
                    GridConfig c = g;
                    apply(c, axis, v);
                    next.push_back(c);
                }
            }
            grid = std::move(next);
        }
    }
    if (grid.empty()) throw ValidationError("the grid is empty");
    return grid;
}

std::string parent_label(const std::vector<std::string>& parents) {
    if (parents.empty()) return "(none)";
    std::string s;
    for (std::size_t i = 0; i < parents.size(); ++i) s += (i ? "+" : "") + parents[i];
    return s;
}

void cmd_gridsearch(const Options& o, std::ostream& err) {
    Manifest m("gridsearch", o, o.out);
    const auto in = load_schema_and_knowledge(o, m, "data");
    const auto& target = o.get("target");
    const auto& positive = o.get("positive");
    Dataset train;
    Dataset test;
    if (o.has("test")) {
        train = load_data(o, m, "data", in.variables);
        test = load_data(o, m, "test", in.variables);
    } else {
        const auto data = load_data(o, m, "data", in.variables);
        std::optional<std::string> stratify;
        if (o.flag("stratify")) stratify = target;
        std::tie(train, test) = train_test_split(data, o.real("split"), o.integer("split-seed"), stratify);
        std::ostringstream tr, te;
        write_table(tr, train);
        write_table(te, test);
        m.output("train.csv", tr.str());
        m.output("test.csv", te.str());
    }
    m.input("grid", o.get("grid"));
    const auto grid = parse_grid(read_file(o.get("grid")), o.integer("seed"));
    err << "cbn: gridsearch: " << grid.size() << " configuration(s), train " << train.rows() << ", test "
        << test.rows() << "\n";

    const auto results = grid_search(train, test, in.knowledge, grid, target, positive, o.threads);

    // Empty-graph baseline: every record gets the target's prior marginal.
    EmConfig base_cfg;
    base_cfg.ess = grid.front().ess;
    base_cfg.max_iterations = grid.front().max_em_iterations;
    base_cfg.tolerance = grid.front().tolerance;
    std::vector<std::string> names = train.names();
    const Dag empty(names);
    const CausalBayesianNetwork baseline(empty, train.variables(), em_fit(empty, train, base_cfg).cpts);
    const auto baseline_auc = evaluate_auc(baseline, test, target, positive);

    std::string table =
        "rank\tn\tm\tlambda\tess\tmax_em_iterations\ttolerance\tmax_sem_iterations\tseed\tin_sample_auc\t"
        "out_of_sample_auc\tedges\ttarget_parents\terror\n";
    ordered_json list = ordered_json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const auto& c = r.config;
        table += std::to_string(i + 1) + "\t" + std::to_string(c.n) + "\t" + std::to_string(c.m) + "\t" +
                 format_double(c.lambda) + "\t" + format_double(c.ess) + "\t" + std::to_string(c.max_em_iterations) +
                 "\t" + format_double(c.tolerance) + "\t" + std::to_string(c.max_sem_iterations) + "\t" +
                 std::to_string(c.seed) + "\t" + json_number_or_null(r.in_sample_auc) + "\t" +
                 json_number_or_null(r.out_of_sample_auc) + "\t" + std::to_string(r.edges) + "\t" +
                 (r.error ? std::string() : parent_label(r.target_parents)) + "\t" + r.error.value_or("") + "\n";
        ordered_json e;
        e["rank"] = i + 1;
        e["config"] = {{"n", c.n},
                       {"m", c.m},
                       {"lambda", c.lambda},
                       {"ess", c.ess},
                       {"max_em_iterations", c.max_em_iterations},
                       {"tolerance", c.tolerance},
                       {"max_sem_iterations", c.max_sem_iterations},
                       {"seed", c.seed}};
        e["in_sample_auc"] = r.in_sample_auc ? ordered_json(*r.in_sample_auc) : ordered_json(nullptr);
        e["out_of_sample_auc"] = r.out_of_sample_auc ? ordered_json(*r.out_of_sample_auc) : ordered_json(nullptr);
        e["edges"] = r.edges;
        e["target_parents"] = r.target_parents;
        e["error"] = r.error ? ordered_json(*r.error) : ordered_json(nullptr);
        list.push_back(std::move(e));
    }

    // Scatter of in- vs out-of-sample AUC, one group per target parent set.
    std::map<std::vector<std::string>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < results.size(); ++i)
        if (!results[i].error) groups[results[i].target_parents].push_back(i);
    std::string fig = "group\tparent_count\ttarget_parents\tn\tlambda\tin_sample_auc\tout_of_sample_auc\n";
    std::size_t g = 0;
    for (const auto& [parents, members] : groups) {
        ++g;
        for (auto i : members) {
            const auto& r = results[i];
            fig += std::to_string(g) + "\t" + std::to_string(parents.size()) + "\t" + parent_label(parents) + "\t" +
                   std::to_string(r.config.n) + "\t" + format_double(r.config.lambda) + "\t" +
                   json_number_or_null(r.in_sample_auc) + "\t" + json_number_or_null(r.out_of_sample_auc) + "\n";
        }
    }

    ordered_json summary;
    summary["target"] = target;
    summary["positive"] = positive;
    summary["train_records"] = train.rows();
    summary["test_records"] = test.rows();
    summary["baseline_out_of_sample_auc"] = baseline_auc ? ordered_json(*baseline_auc) : ordered_json(nullptr);
    summary["results"] = list;
    m.output("grid.tsv", table);
    m.output("auc_scatter.tsv", fig);
    m.output("gridsearch.json", summary.dump(2) + "\n");
    m.metrics()["configurations"] = results.size();
    m.metrics()["failed"] = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.error.has_value(); });
    m.metrics()["parent_set_groups"] = groups.size();
    m.metrics()["best_out_of_sample_auc"] =
        results.front().out_of_sample_auc ? ordered_json(*results.front().out_of_sample_auc) : ordered_json(nullptr);
    m.metrics()["baseline_out_of_sample_auc"] = summary["baseline_out_of_sample_auc"];
    m.write();
}

void cmd_simulate(const Options& o, std::ostream& err) {
    Manifest m("simulate", o, o.out);
    m.input("model", o.get("model"));
    const auto bn = read_model(o.get("model"));
    const auto seed = o.integer("seed");
    Dataset data = sample(bn, o.integer("rows"), seed);

    MissingnessSpec spec;
    spec.mechanism = parse_mechanism(o.get("mechanism"));
    spec.rate = o.real("rate");
    if (spec.mechanism == Mechanism::MAR) {
        if (!o.has("driver")) throw ValidationError("MAR needs --driver");
        spec.driver = o.get("driver");
        data.column_of(spec.driver);
    }
    std::vector<std::string> targets;
    if (o.has("targets")) {
        std::stringstream ss(o.get("targets"));
        std::string name;
        while (std::getline(ss, name, ',')) targets.push_back(name);
    } else {
        // Every column except a MAR driver.
        for (const auto& n : data.names())
            if (n != spec.driver) targets.push_back(n);
    }
    if (spec.rate > 0.0) {
        // Column at position i of the target list uses seed + 1 + i.
        for (std::size_t i = 0; i < targets.size(); ++i) {
            spec.target = targets[i];
            spec.seed = seed + 1 + i;
            data = inject_missing(data, spec);
        }
    }
    err << "cbn: simulate: " << data.rows() << " record(s), " << data.missing_count() << " missing cell(s)\n";
    std::ostringstream table;
    write_table(table, data);
    m.output("data.csv", table.str());
    m.metrics()["records"] = data.rows();
    m.metrics()["missing_cells"] = data.missing_count();
    m.write();
}

void cmd_cohort(const Options& o, std::ostream&) {
    Manifest m("cohort", o, o.out);
    const bool hospital = o.flag("hospital");
    const auto schema = cohort_schema(hospital);
    const auto bn = cohort_network(hospital);
    std::ostringstream s;
    write_schema(s, schema);
    m.output("schema.json", s.str());
    m.output("knowledge.txt", format_knowledge(schema.knowledge()));
    m.output("model.json", format_model(bn));
    m.output("graph.txt", format_edge_list(bn.dag()));
    m.metrics()["nodes"] = bn.size();
    m.metrics()["edges"] = bn.dag().edge_count();
    m.metrics()["target"] = kCohortTarget;
    m.metrics()["positive"] = kCohortPositive;
    m.write();
}

void cmd_serve(const Options& o, std::ostream& err) {
    auto bn = read_model(o.get("model"));
    std::optional<ConfidenceMatrix> confidence;
    if (o.has("confidence")) {
        if (!o.has("bootstraps")) throw ValidationError("--confidence needs --bootstraps");
        confidence = parse_confidence(read_file(o.get("confidence")), o.integer("bootstraps"));
    }
    std::optional<std::string> target;
    if (o.has("target")) target = o.get("target");
    const Service service(std::move(bn), std::move(confidence), target);
    const auto port = o.integer("port");
    if (port > 65535) throw ValidationError("--port out of range");
    err << "cbn: serve: listening on " << o.get("host") << ":" << port << "\n";
    serve_http(service, o.get("host"), static_cast<int>(port));
}

// ---------------------------------------------------------------------------

using Handler = std::function<void(const Options&, std::ostream&)>;

struct Command {
    CLI::App* app;
    Options options;
    Handler handler;
    bool writes_manifest = true;
};

void add_value(Command& c, const std::string& key, const std::string& help, std::optional<std::string> def = {},
               bool required = false) {
    auto& slot = c.options.values[key];
    slot = def.value_or("");
    auto* opt = c.app->add_option("--" + key, slot, help);
    static const std::set<std::string> integers = {"n",         "m",     "seed", "max-em-iter", "max-sem-iter",
                                                   "resamples", "split-seed", "rows", "bootstraps", "port"};
    static const std::set<std::string> reals = {"lambda", "ess", "tol", "level", "split", "rate"};
    opt->type_name(integers.contains(key) ? "INT" : reals.contains(key) ? "NUM" : "TEXT");
    if (required) opt->required();
    if (def && !def->empty()) opt->default_str(*def);
}

void add_flag(Command& c, const std::string& key, const std::string& help) {
    auto& slot = c.options.flags[key];
    slot = false;
    c.app->add_flag("--" + key, slot, help);
}

void add_out(Command& c) { c.app->add_option("--out", c.options.out, "output directory")->required(); }

void add_threads(Command& c) {
    c.app->add_option("--threads", c.options.threads, "worker threads (0 = all cores); never affects outputs")
        ->default_str("1");
}

void add_learning(Command& c) {
    add_value(c, "ess", "Dirichlet equivalent sample size for parameter smoothing", "1");
    add_value(c, "max-em-iter", "maximum EM iterations", "100");
    add_value(c, "tol", "relative EM convergence tolerance", "1e-6");
}

/// Rebuilds and runs the command recorded in a manifest.
int replay(const std::string& manifest_path, const std::string& out_override, bool check, std::size_t threads,
           std::ostream& out, std::ostream& err);

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Causal Bayesian network discovery, fitting, prediction and evaluation", "cbn"};
    app.require_subcommand(1);
    std::map<std::string, Command> commands;

    auto make = [&](const std::string& name, const std::string& help, Handler h) -> Command& {
        auto& c = commands[name];
        c.app = app.add_subcommand(name, help);
        c.handler = std::move(h);
        return c;
    };

    {
        auto& c = make("discover", "bootstrap Structural EM, confidence matrix and average graph", cmd_discover);
        add_value(c, "data", "dataset (CSV)", {}, true);
        add_value(c, "schema", "schema file (JSON); states are inferred from the data when omitted");
        add_value(c, "knowledge", "prior-knowledge file");
        add_value(c, "n", "number of bootstraps", "10");
        add_value(c, "m", "records per bootstrap (0 = dataset size)", "0");
        add_value(c, "lambda", "average-graph confidence threshold", "0.5");
        add_value(c, "seed", "random seed (bootstrap i uses seed + i)", "0");
        add_learning(c);
        add_value(c, "max-sem-iter", "maximum Structural EM iterations", "20");
        add_value(c, "missing-token", "extra cell value read as missing", "");
        add_threads(c);
        add_out(c);
    }
    {
        auto& c = make("fit", "EM parameters for a given graph", cmd_fit);
        add_value(c, "data", "dataset (CSV)", {}, true);
        add_value(c, "graph", "edge list", {}, true);
        add_value(c, "schema", "schema file (JSON)");
        add_value(c, "knowledge", "prior-knowledge file the graph must satisfy");
        add_learning(c);
        add_value(c, "init", "EM start: uniform or random", "uniform");
        add_value(c, "seed", "seed for random EM starts", "0");
        add_value(c, "missing-token", "extra cell value read as missing", "");
        add_out(c);
    }
    {
        auto& c = make("predict", "risk scores P(target = positive | other observed cells)", cmd_predict);
        add_value(c, "model", "model file", {}, true);
        add_value(c, "data", "records (CSV)", {}, true);
        add_value(c, "target", "target node", {}, true);
        add_value(c, "positive", "positive state of the target", {}, true);
        add_value(c, "missing-token", "extra cell value read as missing", "");
        add_out(c);
    }
    {
        auto& c = make("eval", "ROC, AUC and bootstrap confidence interval from a score file", cmd_eval);
        add_value(c, "scores", "score file written by predict", {}, true);
        add_value(c, "resamples", "bootstrap resamples for the AUC interval", "2000");
        add_value(c, "level", "confidence level", "0.95");
        add_value(c, "seed", "bootstrap seed", "0");
        add_out(c);
    }
    {
        auto& c = make("gridsearch", "learn and score one model per hyperparameter configuration", cmd_gridsearch);
        add_value(c, "data", "dataset (CSV); the training set when --test is given", {}, true);
        add_value(c, "test", "held-out dataset (CSV); otherwise --data is split");
        add_value(c, "schema", "schema file (JSON)");
        add_value(c, "knowledge", "prior-knowledge file");
        add_value(c, "grid", "grid file (JSON)", {}, true);
        add_value(c, "target", "target node", {}, true);
        add_value(c, "positive", "positive state of the target", {}, true);
        add_value(c, "split", "train fraction", "0.7");
        add_value(c, "split-seed", "seed of the train/test shuffle", "0");
        add_flag(c, "stratify", "stratify the split on the target");
        add_value(c, "seed", "default bootstrap seed for configurations", "0");
        add_value(c, "missing-token", "extra cell value read as missing", "");
        add_threads(c);
        add_out(c);
    }
    {
        auto& c = make("simulate", "forward-sample a model and inject missingness", cmd_simulate);
        add_value(c, "model", "ground-truth model file", {}, true);
        add_value(c, "rows", "number of records", {}, true);
        add_value(c, "seed", "sampling seed; missingness in target column i uses seed + 1 + i", "0");
        add_value(c, "mechanism", "MCAR, MAR or MNAR", "MCAR");
        add_value(c, "rate", "missingness rate", "0");
        add_value(c, "targets", "comma-separated columns to blank (default: all but the MAR driver)");
        add_value(c, "driver", "MAR driver column");
        add_out(c);
    }
    {
        auto& c = make("cohort", "write the reference cohort schema, knowledge and ground-truth model", cmd_cohort);
        add_flag(c, "hospital", "add the 10-state Hospital context variable");
        add_out(c);
    }
    {
        auto& c = make("serve", "HTTP JSON API over a fitted model", cmd_serve);
        add_value(c, "model", "model file", {}, true);
        add_value(c, "confidence", "confidence matrix for edge strengths");
        add_value(c, "bootstraps", "number of bootstraps behind --confidence");
        add_value(c, "target", "default target node");
        add_value(c, "host", "bind address", "127.0.0.1");
        add_value(c, "port", "port", "8080");
        c.writes_manifest = false;
    }
    std::string manifest_path;
    std::string replay_out;
    bool replay_check = false;
    std::size_t replay_threads = 1;
    auto* rp = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    rp->add_option("--manifest", manifest_path, "manifest.json to replay")->required();
    rp->add_option("--out", replay_out, "output directory (default: the manifest's directory)");
    rp->add_flag("--check", replay_check, "fail unless every output hashes as recorded");
    rp->add_option("--threads", replay_threads, "worker threads")->default_str("1");

    std::vector<std::string> argv_store = {"cbn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        err << "cbn: usage error: " << e.what() << "\n";
        err << "cbn: run with --help for more information\n";
        return kUsage;
    }

    if (rp->parsed()) return replay(manifest_path, replay_out, replay_check, replay_threads, out, err);
    for (auto& [name, c] : commands) {
        if (!c.app->parsed()) continue;
        if (c.writes_manifest) ensure_dir(c.options.out);
        c.handler(c.options, err);
        if (c.writes_manifest) out << (fs::path(c.options.out) / "manifest.json").string() << "\n";
        return kOk;
    }
    return kUsage;
}

int replay(const std::string& manifest_path, const std::string& out_override, bool check, std::size_t threads,
           std::ostream& out, std::ostream& err) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    std::vector<std::string> args;
    std::map<std::string, std::string> recorded;
    try {
        if (j.at("tool") != "cbn" || j.at("manifest_version") != kManifestVersion) {
            throw ValidationError("unsupported manifest");
        }
        const auto command = j.at("command").get<std::string>();
        if (command == "replay" || command == "serve") throw ValidationError("cannot replay '" + command + "'");
        args.push_back(command);
        for (auto it = j.at("args").begin(); it != j.at("args").end(); ++it) {
            const auto v = it.value().get<std::string>();
            if (v.empty()) continue;
            args.push_back("--" + it.key());
            args.push_back(v);
        }
        for (auto it = j.at("flags").begin(); it != j.at("flags").end(); ++it)
            if (it.value().get<bool>()) args.push_back("--" + it.key());
        for (auto it = j.at("outputs").begin(); it != j.at("outputs").end(); ++it)
            recorded[it.key()] = it.value().get<std::string>();
        for (const auto& in : j.at("inputs")) {
            const auto path = in.at("path").get<std::string>();
            if (file_hash(path) != in.at("hash").get<std::string>()) {
                throw ValidationError("input '" + path + "' changed since the manifest was written");
            }
        }
        const bool threaded = command == "discover" || command == "gridsearch";
        if (threaded) {
            args.push_back("--threads");
            args.push_back(std::to_string(threads));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    const auto dir = out_override.empty() ? fs::path(manifest_path).parent_path().string() : out_override;
    args.push_back("--out");
    args.push_back(dir.empty() ? "." : dir);
    const int code = dispatch(args, out, err);
    if (code != kOk || !check) return code;
    std::vector<std::string> mismatched;
    for (const auto& [name, hash] : recorded) {
        if (file_hash((fs::path(dir.empty() ? "." : dir) / name).string()) != hash) mismatched.push_back(name);
    }
    if (!mismatched.empty()) {
        std::string list;
        for (const auto& n : mismatched) list += (list.empty() ? "" : ", ") + n;
        throw ValidationError("replay produced different outputs: " + list);
    }
    err << "cbn: replay: all " << recorded.size() << " output(s) match\n";
    return kOk;
}

int exit_code_for(const std::exception_ptr& p, std::string& kind) {
    try {
        std::rethrow_exception(p);
    } catch (const BootstrapFailure& e) {
        if (e.cause()) return exit_code_for(e.cause(), kind);
        kind = "error";
        return kFailure;
    } catch (const UsageError&) {
        kind = "usage error";
        return kUsage;
    } catch (const IoError&) {
        kind = "io error";
        return kIo;
    } catch (const ZeroProbabilityEvidence&) {
        kind = "numeric error";
        return kNumeric;
    } catch (const ValidationError&) {
        kind = "validation error";
        return kValidation;
    } catch (...) {
        kind = "error";
        return kFailure;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(args, out, err);
    } catch (const std::exception& e) {
        std::string kind;
        const int code = exit_code_for(std::current_exception(), kind);
        err << "cbn: " << kind << ": " << e.what() << "\n";
        return code;
    }
}

}  // namespace cbn::cli
