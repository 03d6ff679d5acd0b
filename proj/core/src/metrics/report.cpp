#include "overgen/metrics/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "overgen/annotation/agreement.hpp"
#include "overgen/annotation/quality.hpp"
#include "overgen/error.hpp"
#include "overgen/hashing.hpp"
#include "overgen/metrics/statistics.hpp"

namespace overgen::metrics {

using nlohmann::json;

const ReportRow* MetricsReport::row(std::string_view name) const {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.name == name; });
    return it == rows.end() ? nullptr : &*it;
}

namespace {

json cell_json(const MetricCell& c) {
    json j = json::object();
    j["value"] = c.value ? json(*c.value) : json(nullptr);
    if (c.stderr_) j["stderr"] = *c.stderr_;
    return j;
}

std::string format_cell(const MetricCell& c) {
    if (!c.value) return "---";
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << *c.value;
    if (c.stderr_) os << " +/- " << std::setprecision(1) << *c.stderr_;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

EvalSet subset(const EvalSet& all, const std::unordered_map<std::string, Split>& split_of, Split split) {
    EvalSet s;
    s.threshold = all.threshold;
    for (const auto& inst : all.instances)
        if (split_of.at(inst.instance_id) == split) s.instances.push_back(inst);
    return s;
}

}  // namespace

json MetricsReport::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["threshold"] = to_string(threshold);
    j["splits"] = json::array();
    for (auto s : splits) j["splits"].push_back(to_string(s));
    j["rows"] = json::array();
    for (const auto& r : rows) {
        json row{{"name", r.name}, {"backend_id", r.backend_id}};
        row["select1"] = json::object();
        row["ap"] = json::object();
        for (const auto& [s, c] : r.select1) row["select1"][std::string(to_string(s))] = cell_json(c);
        for (const auto& [s, c] : r.ap) row["ap"][std::string(to_string(s))] = cell_json(c);
        if (!r.ties.empty()) {
            row["ap_ties"] = json::object();
            for (const auto& [s, t] : r.ties)
                row["ap_ties"][std::string(to_string(s))] = {
                    {"pessimistic", t.pessimistic ? json(*t.pessimistic) : json(nullptr)},
                    {"optimistic", t.optimistic ? json(*t.optimistic) : json(nullptr)},
                    {"n_mixed_ties", t.n_mixed_ties}};
        }
        j["rows"].push_back(std::move(row));
    }
    j["correlations"] = json::array();
    for (const auto& c : correlations)
        j["correlations"].push_back({{"attribute", c.attribute},
                                     {"rho", c.rho ? json(*c.rho) : json(nullptr)},
                                     {"p_two_sided", c.p_two_sided ? json(*c.p_two_sided) : json(nullptr)},
                                     {"n", c.n}});
    j["agreement_alpha"] = agreement_alpha ? json(*agreement_alpha) : json(nullptr);
    j["nll_dominance"] = nll_dominance ? json(*nll_dominance) : json(nullptr);
    j["n_unlabeled"] = n_unlabeled;
    j["provenance"] = provenance;
    return j;
}

namespace {

std::optional<double> opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

MetricsReport MetricsReport::from_json(const json& j) {
    MetricsReport r;
    r.experiment = j.at("experiment").get<std::string>();
    r.threshold = parse_threshold(j.at("threshold").get<std::string>());
    for (const auto& s : j.at("splits")) r.splits.push_back(parse_split(s.get<std::string>()));
    for (const auto& row : j.at("rows")) {
        ReportRow out;
        out.name = row.at("name").get<std::string>();
        out.backend_id = row.value("backend_id", std::string{});
        for (const auto& [k, v] : row.at("select1").items()) out.select1[parse_split(k)] = {opt(v, "value"), opt(v, "stderr")};
        for (const auto& [k, v] : row.at("ap").items()) out.ap[parse_split(k)] = {opt(v, "value"), opt(v, "stderr")};
        if (row.contains("ap_ties"))
            for (const auto& [k, v] : row.at("ap_ties").items())
                out.ties[parse_split(k)] = {opt(v, "pessimistic"), opt(v, "optimistic"),
                                            v.at("n_mixed_ties").get<std::size_t>()};
        r.rows.push_back(std::move(out));
    }
    for (const auto& c : j.value("correlations", json::array()))
        r.correlations.push_back(
            {c.at("attribute").get<std::string>(), opt(c, "rho"), opt(c, "p_two_sided"), c.at("n").get<std::size_t>()});
    r.agreement_alpha = opt(j, "agreement_alpha");
    r.nll_dominance = opt(j, "nll_dominance");
    r.n_unlabeled = j.value("n_unlabeled", std::size_t{0});
    r.provenance = j.value("provenance", json::object());
    return r;
}

std::string MetricsReport::render_table() const {
    const std::string t = threshold == Threshold::at_3of3 ? "3/3" : "2/3";
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head1{""}, head2{""};
    for (std::size_t i = 0; i < splits.size(); ++i) head1.push_back(i == 0 ? "Select-1 Acc@" + t : "");
    for (std::size_t i = 0; i < splits.size(); ++i) head1.push_back(i == 0 ? "Expl.-level AP@" + t : "");
    for (int pass = 0; pass < 2; ++pass)
        for (auto s : splits) {
            std::string name(to_string(s));
            name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
            head2.push_back(name);
        }
    grid.push_back(head1);
    grid.push_back(head2);
    for (const auto& r : rows) {
        std::vector<std::string> line{r.name};
        for (auto s : splits) line.push_back(r.select1.count(s) ? format_cell(r.select1.at(s)) : "---");
        for (auto s : splits) line.push_back(r.ap.count(s) ? format_cell(r.ap.at(s)) : "---");
        grid.push_back(std::move(line));
    }
    std::vector<std::size_t> width(grid[0].size(), 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    // A spanning header may be wider than its first column.
    for (std::size_t c = 1; c < width.size(); ++c) width[c] = std::max<std::size_t>(width[c], 5);
    std::ostringstream os;
    for (std::size_t l = 0; l < grid.size(); ++l) {
        std::string text;
        for (std::size_t c = 0; c < grid[l].size(); ++c) {
            if (c > 0) text += "  ";
            const auto& cell = grid[l][c];
            if (l == 0) {
                text += cell;
                if (cell.size() < width[c]) text.append(width[c] - cell.size(), ' ');
                continue;
            }
            if (c == 0) {
                text += cell;
                text.append(width[c] - cell.size(), ' ');
            } else {
                text.append(width[c] - cell.size(), ' ');
                text += cell;
            }
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        os << text << '\n';
    }
    return os.str();
}

std::string MetricsReport::diagnostics_csv() const {
    std::vector<std::string> names;
    for (const auto& r : rows)
        if (!diagnostics.empty() && diagnostics.front().selected.count(r.name)) names.push_back(r.name);
    std::ostringstream os;
    os << "instance_id,split,n_candidates,n_positive";
    for (const auto& n : names) os << ',' << csv_field(n + " selected") << ',' << csv_field(n + " positive");
    os << '\n';
    for (const auto& d : diagnostics) {
        os << csv_field(d.instance_id) << ',' << to_string(d.split) << ',' << d.n_candidates << ',' << d.n_positive;
        for (const auto& n : names) {
            auto it = d.selected.find(n);
            if (it == d.selected.end())
                os << ",,";
            else
                os << ',' << csv_field(it->second.first) << ',' << (it->second.second ? 1 : 0);
        }
        os << '\n';
    }
    return os.str();
}

std::vector<AttributeCorrelation> attribute_correlations(std::span<const Judgment> judgments, int permutations,
                                                         std::uint64_t seed) {
    using annotation::Attribute;
    std::vector<AbsolutePayload> payloads;
    for (const auto& j : judgments)
        if (!j.excluded && j.kind == JudgmentKind::absolute) payloads.push_back(std::get<AbsolutePayload>(j.payload));
    const auto codes = annotation::encode_absolute_scores(payloads);
    std::vector<AttributeCorrelation> out;
    for (auto a : annotation::kAttributes) {
        if (a == Attribute::acceptable) continue;
        AttributeCorrelation c;
        c.attribute = std::string(annotation::to_string(a));
        auto [x, y] = annotation::paired_columns(codes, a, Attribute::acceptable);
        c.n = x.size();
        if (c.n >= 3) {
            auto r = spearman_rho(x, y, permutations, derive_seed(seed, c.attribute));
            c.rho = r.rho;
            c.p_two_sided = r.p_two_sided;
        }
        out.push_back(std::move(c));
    }
    return out;
}

MetricsReport build_report(const ReportInputs& in) {
    MetricsReport report;
    report.experiment = in.experiment;
    report.threshold = in.threshold;

    std::unordered_map<std::string, Split> split_of;
    for (const auto& inst : in.instances) split_of.emplace(inst.id, inst.split);
    for (const auto& c : in.candidates)
        if (!split_of.count(c.instance_id))
            throw InvariantError(c.candidate_id, "unknown instance '" + c.instance_id + "'");

    const EvalSet all = build_eval_set(in.candidates, in.labels, in.threshold);
    report.n_unlabeled = all.n_unlabeled;
    report.splits = in.splits;
    if (report.splits.empty()) {
        for (auto s : {Split::dev, Split::test, Split::test2})
            if (std::any_of(all.instances.begin(), all.instances.end(),
                            [&](const auto& i) { return split_of.at(i.instance_id) == s; }))
                report.splits.push_back(s);
    }
    if (report.splits.empty()) throw PreconditionError("no evaluation split has candidates");

    std::map<Split, EvalSet> sets;
    for (auto s : report.splits) {
        sets[s] = subset(all, split_of, s);
        if (sets[s].instances.empty())
            throw PreconditionError("split '" + std::string(to_string(s)) + "' has no candidates");
    }

    std::map<std::string, std::unordered_map<std::string, std::string>> selections;
    auto add_system = [&](const std::string& name, const filter::FilterScoreSet& scores, bool ap_row) {
        ReportRow row{name, scores.backend_id, {}, {}, {}};
        const auto by_id = scores.by_candidate();
        auto& sel = selections[name];
        for (const auto& s : filter::select_all(in.candidates, scores)) sel.emplace(s.instance_id, s.candidate_id);
        for (auto s : report.splits) {
            row.select1[s] = {select1_accuracy(sets[s], sel), std::nullopt};
            if (!ap_row) continue;
            auto d = explanation_ap_detail(sets[s], by_id);
            row.ap[s] = {d.ap, std::nullopt};
            row.ties[s] = {d.pessimistic, d.optimistic, d.n_mixed_ties};
        }
        report.rows.push_back(std::move(row));
    };

    {
        ReportRow random{"Random", "", {}, {}, {}};
        ReportRow constant{"Constant", "", {}, {}, {}};
        for (auto s : report.splits) {
            auto rb = random_baseline(sets[s], in.n_random_trials, derive_seed(in.seed, to_string(s)));
            random.select1[s] = MetricCell{rb.select1.mean, rb.select1.stderr_};
            random.ap[s] = sets[s].n_positive() > 0 ? MetricCell{rb.ap.mean, rb.ap.stderr_} : MetricCell{};
            constant.select1[s] = {};
            constant.ap[s] = {constant_baseline(sets[s].n_positive(), sets[s].n_candidates()), std::nullopt};
        }
        report.rows.push_back(std::move(random));
        report.rows.push_back(std::move(constant));
    }

    try {
        add_system("NLL", filter::score_nll(in.candidates), true);
    } catch (const filter::MissingLogprobsError& e) {
        spdlog::warn("report: NLL row skipped: {}", e.what());
    }

    {
        filter::FilterScoreSet greedy;
        greedy.backend_id = "greedy";
        for (const auto& c : in.candidates) greedy.scores.push_back({c.candidate_id, c.decode.is_greedy() ? 1.0 : 0.0, {}});
        add_system("Greedy", greedy, false);
    }

    for (const auto& sys : in.systems) add_system(sys.name, sys.scores, true);

    {
        ReportRow oracle{"Oracle U.B.", "", {}, {}, {}};
        for (auto s : report.splits) {
            oracle.select1[s] = {oracle_select1(sets[s]), std::nullopt};
            oracle.ap[s] = {sets[s].n_positive() > 0 ? std::optional<double>(100.0) : std::nullopt, std::nullopt};
        }
        report.rows.push_back(std::move(oracle));
    }

    for (auto s : report.splits)
        for (const auto& inst : sets[s].instances) {
            ItemDiagnostic d;
            d.instance_id = inst.instance_id;
            d.split = s;
            d.n_candidates = inst.candidates.size();
            for (const auto& c : inst.candidates) d.n_positive += c.positive ? 1 : 0;
            for (const auto& [name, sel] : selections) {
                auto it = sel.find(inst.instance_id);
                if (it == sel.end()) continue;
                auto c = std::find_if(inst.candidates.begin(), inst.candidates.end(),
                                      [&](const auto& x) { return x.candidate_id == it->second; });
                d.selected[name] = {it->second, c != inst.candidates.end() && c->positive};
            }
            report.diagnostics.push_back(std::move(d));
        }

    std::vector<Judgment> acceptability;
    for (const auto& j : in.judgments)
        if (!j.excluded && j.kind == JudgmentKind::acceptability) acceptability.push_back(j);
    if (!acceptability.empty()) {
        try {
            report.agreement_alpha =
                annotation::krippendorff_alpha(annotation::rating_matrix(acceptability), annotation::Scale::nominal)
                    .alpha;
        } catch (const PreconditionError& e) {
            spdlog::warn("report: agreement not computed: {}", e.what());
        }
    }
    report.correlations = attribute_correlations(in.judgments, in.permutations, in.seed);
    report.nll_dominance = filter::nll_dominance_fraction(in.candidates);

    report.provenance["backend_ids"] = json::array();
    for (const auto& sys : in.systems) report.provenance["backend_ids"].push_back(sys.scores.backend_id);
    report.provenance["seed"] = in.seed;
    report.provenance["n_random_trials"] = in.n_random_trials;
    return report;
}

}  // namespace overgen::metrics
