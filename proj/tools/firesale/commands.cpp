#include "firesale/commands.hpp"

#include "firesale/counterfactual.hpp"
#include "firesale/dynamics.hpp"
#include "firesale/scenario_io.hpp"
#include "firesale/transitions.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace firesale::cli {

namespace {

std::string text_of(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) return v;
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else if constexpr (std::is_same_v<T, double>) return fmt::format("{:.10g}", v);
            else return fmt::format("{}", v);
        },
        c);
}

nlohmann::ordered_json json_of(const Cell& c) {
    return std::visit([](const auto& v) { return nlohmann::ordered_json(v); }, c);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

}  // namespace

void emit(const RunReport& r, Format format, std::ostream& out) {
    if (format == Format::json) {
        nlohmann::ordered_json doc;
        doc["command"] = r.command;
        doc["scenario_digest"] = r.digest;
        doc["seed"] = r.seed;
        auto& meta = doc["meta"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : r.meta) meta[k] = json_of(v);
        auto& tables = doc["tables"] = nlohmann::ordered_json::object();
        for (const auto& t : r.tables) {
            auto rows = nlohmann::ordered_json::array();
            for (const auto& row : t.rows) {
                nlohmann::ordered_json obj = nlohmann::ordered_json::object();
                for (std::size_t c = 0; c < t.columns.size(); ++c) obj[t.columns[c]] = json_of(row[c]);
                rows.push_back(std::move(obj));
            }
            tables[t.name] = std::move(rows);
        }
        out << doc.dump(2) << "\n";
        return;
    }
    if (format == Format::csv) {
        out << "# firesale " << r.command << " seed=" << r.seed << " digest=" << r.digest << "\n";
        for (const auto& [k, v] : r.meta) out << "# " << k << "=" << text_of(v) << "\n";
        for (const auto& t : r.tables) {
            out << "# table " << t.name << "\n";
            for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
            out << "\n";
            for (const auto& row : t.rows) {
                for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(text_of(row[c]));
                out << "\n";
            }
        }
        return;
    }
    out << "firesale " << r.command << "  seed " << r.seed << "  scenario " << r.digest << "\n";
    for (const auto& [k, v] : r.meta) out << "  " << k << ": " << text_of(v) << "\n";
    for (const auto& t : r.tables) {
        out << "\n[" << t.name << "]\n";
        std::vector<std::size_t> width(t.columns.size());
        std::vector<std::vector<std::string>> cells;
        for (std::size_t c = 0; c < t.columns.size(); ++c) width[c] = t.columns[c].size();
        for (const auto& row : t.rows) {
            std::vector<std::string> line;
            for (std::size_t c = 0; c < row.size(); ++c) {
                line.push_back(text_of(row[c]));
                width[c] = std::max(width[c], line.back().size());
            }
            cells.push_back(std::move(line));
        }
        auto print = [&](const std::vector<std::string>& line) {
            for (std::size_t c = 0; c < line.size(); ++c) {
                out << (c ? "  " : "") << line[c];
                if (c + 1 < line.size()) out << std::string(width[c] - line[c].size(), ' ');
            }
            out << "\n";
        };
        print(t.columns);
        for (const auto& line : cells) print(line);
    }
}

namespace {

struct Options {
    std::string scenario;
    std::optional<double> epsilon, beta;
    std::string format = "table";
    std::optional<unsigned long long> seed;
    int threads = 1;
    int max_epochs = -1;
    bool bailin_individual_exit = false;
    std::string epsilon_range, beta_range;
    std::optional<double> sigma, sigma_bailin;
};

struct Range {
    double from = 0, to = 0, step = 0;
};

Range parse_range(const std::string& spec) {
    Range r;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> r.from >> c1 >> r.to >> c2 >> r.step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof())
        throw Error(ErrorKind::validation, "range '" + spec + "' must look like from:to:step");
    if (!(r.step > 0)) throw Error(ErrorKind::validation, "range step must be positive");
    return r;
}

std::string join(const std::vector<BankId>& ids) {
    std::string s;
    for (const auto& id : ids) s += (s.empty() ? "" : " ") + id;
    return s;
}

Cell maybe(const std::optional<double>& v) { return v ? Cell(*v) : Cell(std::string("absent")); }

RunReport start(const char* command, const Scenario& sc, const std::string& text) {
    RunReport r;
    r.command = command;
    r.digest = digest(text);
    r.seed = sc.market.rng_seed;
    return r;
}

RunReport cmd_clear(const Scenario& sc, RunReport r) {
    require_valid(sc);
    const auto& env = sc.market;
    auto sol = clear(sc.banks, env);
    auto lip = liquidity_threshold(sc.banks, env);
    r.meta = {{"method", sol.method},       {"iterations", static_cast<long long>(sol.iterations)},
              {"residual", sol.residual},   {"certified", sol.certified},
              {"beta_bar", lip.beta_bar},   {"lipschitz", lip.lipschitz},
              {"expansion", sol.expansion}, {"total_realized", sol.total_realized()}};
    Table t{"banks", {"id", "assets", "equity", "leverage", "demanded", "realized", "flags"}, {}};
    for (std::size_t i = 0; i < sc.banks.size(); ++i) {
        const auto& b = sc.banks[i];
        std::string flags;
        if (leverage_after_shock(b, env.epsilon).wiped_out) flags = "wiped-out";
        flags += std::string(flags.empty() ? "" : "|") + (sol.realized[i] < 0 ? "credit" : "selling");
        t.rows.push_back({b.id, b.assets, b.equity, b.leverage(), sol.demanded[i], sol.realized[i], flags});
    }
    r.tables.push_back(std::move(t));
    return r;
}

RunReport cmd_cms(const Scenario& sc, RunReport r) {
    require_valid(sc);
    Table t{"banks", {"id", "demanded", "realized_alone"}, {}};
    for (const auto& b : sc.banks)
        t.rows.push_back({b.id, liquidation_demand(b, sc.market), cms_solve(b, sc.market)});
    r.tables.push_back(std::move(t));
    return r;
}

RunReport cmd_coe(const Scenario& sc, RunReport r) {
    require_valid(sc);
    const auto& env = sc.market;
    auto d = coe_delta_vs_cms(sc.banks, env);
    auto part = classify_partition(sc.banks, env);
    r.meta = {{"schelling_point", schelling_point},
              {"knightian_point", knightian_point},
              {"positive", join(part.positive)},
              {"negative", join(part.negative)},
              {"positive_check", part.positive_crowded_out},
              {"negative_check", part.negative_gains_credit}};
    Table t{"versus_alone", {"id", "cluster_x", "alone_x", "delta", "incentive"}, {}};
    for (std::size_t i = 0; i < d.banks.size(); ++i)
        t.rows.push_back({d.banks[i], d.cluster_x[i], d.reference_x[i], d.delta[i], std::string(to_string(d.incentive[i]))});
    r.tables.push_back(std::move(t));
    Table g{"versus_own_side", {"id", "side", "cluster_x", "side_x", "delta", "incentive"}, {}};
    auto add = [&](const CoeDelta& cd, const char* side) {
        for (std::size_t i = 0; i < cd.banks.size(); ++i)
            g.rows.push_back({cd.banks[i], std::string(side), cd.cluster_x[i], cd.reference_x[i], cd.delta[i],
                              std::string(to_string(cd.incentive[i]))});
    };
    add(part.positive_alone, "positive");
    add(part.negative_alone, "negative");
    r.tables.push_back(std::move(g));
    return r;
}

RunReport cmd_decompose(const Scenario& sc, const Options& o, RunReport r) {
    require_valid(sc);
    const auto& env = sc.market;
    Decomposition d;
    if (o.sigma || o.sigma_bailin) {
        std::mt19937_64 rng(env.rng_seed);
        d = strong_decompose(sc.banks, env, o.sigma.value_or(0.0), o.sigma_bailin.value_or(0.0), rng);
    } else {
        d = weak_decompose(sc.banks, env);
    }
    auto sol = clear(sc.banks, env);
    std::map<BankId, std::string> part;
    for (const auto& id : d.bailout) part[id] = "bailout";
    for (const auto& id : d.bailin) part[id] = "bailin";
    for (const auto& id : d.remainder) part[id] = "residual";
    for (const auto& id : d.bailout_transfer) part[id] = "bailout-transfer";
    for (const auto& id : d.bailin_transfer) part[id] = "bailin-transfer";
    r.meta = {{"mode", std::string(d.strong ? "strong" : "weak")},
              {"bailout", join(d.bailout)},
              {"bailin", join(d.bailin)},
              {"residual", join(d.residual)}};
    if (d.strong) {
        r.meta.emplace_back("sigma", d.sigma);
        r.meta.emplace_back("sigma_bailin", d.sigma_bailin);
    }
    Table t{"banks", {"id", "part", "leverage", "assets", "demanded", "realized"}, {}};
    for (std::size_t i = 0; i < sc.banks.size(); ++i) {
        const auto& b = sc.banks[i];
        t.rows.push_back({b.id, part[b.id], b.leverage(), b.assets, sol.demanded[i], sol.realized[i]});
    }
    r.tables.push_back(std::move(t));
    Table rounds{"rounds", {"round", "bailout", "bailin", "residual"}, {}};
    auto it = iterate_weak_decompose(sc.banks, env);
    for (std::size_t k = 0; k < it.size(); ++k)
        rounds.rows.push_back({static_cast<long long>(k), join(it[k].bailout), join(it[k].bailin), join(it[k].residual)});
    r.tables.push_back(std::move(rounds));
    return r;
}

RunReport cmd_chain(const Scenario& sc, RunReport r) {
    require_valid(sc);
    auto chain = chain_of(sc.banks, sc.market);
    auto split = chain_decompose(chain, sc.banks, sc.market);
    r.meta = {{"class", std::string(to_string(chain.cls))},
              {"head_class", std::string(to_string(split.head.cls))},
              {"tail_class", std::string(to_string(split.tail.cls))}};
    std::set<BankId> head;
    for (const auto& l : split.head.links) head.insert(l.id);
    Table t{"chain", {"position", "id", "leverage", "assets", "demanded", "realized", "segment"}, {}};
    for (std::size_t i = 0; i < chain.links.size(); ++i) {
        const auto& l = chain.links[i];
        t.rows.push_back({static_cast<long long>(i), l.id, l.leverage, l.assets, l.demanded, l.realized,
                          std::string(head.count(l.id) ? "head" : "tail")});
    }
    r.tables.push_back(std::move(t));
    return r;
}

RunReport cmd_perfect(const Scenario& sc, const Options& o, RunReport r) {
    DynamicsOptions opts;
    opts.max_epochs = o.max_epochs;
    opts.bailin_individual_exit = o.bailin_individual_exit;
    auto run = run_to_stability(sc, opts);
    const auto& fin = run.final_state;
    auto purity = purity_check(fin, sc.banks, sc.market);
    auto audit = no_turning_back_audit(run.trace);
    r.meta = {{"epochs", static_cast<long long>(run.trace.states.size() - 1)},
              {"stable", run.trace.stable},
              {"dimension", static_cast<long long>(fin.dimension())},
              {"all_pure", purity.all_pure},
              {"signs_consistent", purity.signs_consistent},
              {"fixpoint", purity.fixpoint},
              {"equivalent", purity.equivalent},
              {"no_turning_back", audit.pass}};
    if (run.trace.stable) {
        auto bounds = iteration_bounds(sc, run);
        r.meta.emplace_back("bound_m", static_cast<long long>(bounds.m));
        r.meta.emplace_back("bound_n", static_cast<long long>(bounds.n));
        r.meta.emplace_back("bound_upper", static_cast<long long>(bounds.upper));
        r.meta.emplace_back("bound_observed", static_cast<long long>(bounds.observed));
        r.meta.emplace_back("bound_within", bounds.within);
    }
    Table ev{"events", {"epoch", "bank", "from", "to", "rule"}, {}};
    for (const auto& e : run.trace.events)
        ev.rows.push_back({static_cast<long long>(e.epoch), e.bank, static_cast<long long>(e.from),
                           static_cast<long long>(e.to), std::string(to_string(e.rule))});
    r.tables.push_back(std::move(ev));
    Table sub{"subspaces", {"index", "born", "members", "kind", "purified_at", "operator_count"}, {}};
    for (std::size_t i = 0; i < fin.subspaces.size(); ++i) {
        const auto& s = fin.subspaces[i];
        Cell purified = i < run.trace.purification_time.size()
                            ? Cell(static_cast<long long>(run.trace.purification_time[i])) : Cell(std::string("-"));
        Cell ops = i < run.trace.operator_count.size()
                       ? Cell(static_cast<long long>(run.trace.operator_count[i])) : Cell(std::string("-"));
        sub.rows.push_back({static_cast<long long>(s.index), static_cast<long long>(s.born), join(s.members),
                            std::string(to_string(purity.kinds[i])), purified, ops});
    }
    r.tables.push_back(std::move(sub));
    return r;
}

RunReport cmd_sweep(const Scenario& sc, const Options& o, RunReport r) {
    require_valid(sc);
    const auto& env = sc.market;
    const bool over_beta = !o.beta_range.empty();
    if (over_beta && !o.epsilon_range.empty())
        throw Error(ErrorKind::validation, "give either --epsilon-range or --beta-range, not both");
    Range range = parse_range(over_beta ? o.beta_range : (o.epsilon_range.empty() ? "0:0.1:0.001" : o.epsilon_range));
    auto grid = range.from > range.to ? std::vector<double>{} : make_grid(range.from, range.to, range.step);
    const char* param = over_beta ? "beta" : "epsilon";
    r.meta = {{"parameter", std::string(param)}, {"points", static_cast<long long>(grid.size())}};

    std::map<double, int> labels;
    if (!over_beta && sc.banks.size() == 2 && !grid.empty()) {
        auto tl = regime_classify(sc.banks, env, grid);
        for (const auto& s : tl.samples) labels[s.epsilon] = s.label;
        r.meta.emplace_back("pair_type", std::string(to_string(tl.type)));
        r.meta.emplace_back("regimes_match", tl.matches);
        std::string seq;
        for (const auto& iv : tl.intervals) seq += (seq.empty() ? "" : " ") + std::to_string(iv.label);
        r.meta.emplace_back("regime_sequence", seq);
    }
    Table t{"sweep", {param, "id", "demanded", "realized", "realized_alone", "regime"}, {}};
    std::vector<std::vector<std::vector<Cell>>> rows(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        auto e = env;
        (over_beta ? e.beta : e.epsilon) = grid[g];
        auto sol = clear(sc.banks, e);
        for (std::size_t i = 0; i < sc.banks.size(); ++i) {
            Cell label = labels.count(grid[g]) ? Cell(static_cast<long long>(labels[grid[g]])) : Cell(std::string(""));
            t.rows.push_back({grid[g], sc.banks[i].id, sol.demanded[i], sol.realized[i], cms_solve(sc.banks[i], e), label});
        }
    }
    r.tables.push_back(std::move(t));
    if (!over_beta) {
        auto sch = compression_sweep(sc.banks, env, grid, o.threads);
        r.meta.emplace_back("ignition", sch.ignition);
        r.meta.emplace_back("exit_order_ascending", sch.ascending);
        r.meta.emplace_back("one_exit_at_a_time", sch.one_at_a_time);
        Table ex{"exits", {"epsilon", "id", "leverage"}, {}};
        for (const auto& x : sch.exits) ex.rows.push_back({x.epsilon, x.bank, x.leverage});
        r.tables.push_back(std::move(ex));
    }
    return r;
}

RunReport cmd_thresholds(const Scenario& sc, RunReport r) {
    require_valid(sc);
    auto ts = thresholds(sc.banks, sc.market);
    auto st = shock_thresholds(sc.banks, sc.market);
    auto lip = liquidity_threshold(sc.banks, sc.market);
    r.meta = {{"hierarchy_ok", ts.hierarchy_ok},
              {"ignition_alone", ts.ignition_alone},
              {"ignition_cluster", ts.ignition_cluster},
              {"beta_root_monotone_in_epsilon", ts.beta_monotone_in_eps},
              {"lowest_demand_root", st.lowest_root},
              {"lowest_equity_bound", st.lowest_equity_bound},
              {"beta_bar", lip.beta_bar},
              {"beta_bar_lipschitz", lip.beta_bar_lipschitz},
              {"beta_bar_self_map", lip.beta_bar_self_map}};
    Table t{"banks", {"id", "leverage", "demand_root", "realized_root", "beta_root", "equity_bound"}, {}};
    for (std::size_t i = 0; i < ts.banks.size(); ++i) {
        const auto& b = ts.banks[i];
        t.rows.push_back({b.id, sc.banks[i].leverage(), b.demand_root, maybe(b.realized_root), maybe(b.beta_root),
                          st.equity_bounds[i]});
    }
    r.tables.push_back(std::move(t));
    return r;
}

RunReport cmd_isocheck(const Scenario& sc, RunReport r) {
    require_valid(sc);
    const auto& env = sc.market;
    auto chain = sort_by_leverage_desc(sc.banks);
    Table t{"maps",
            {"position", "id", "next_id", "assets", "eps_from_assets", "assets_back", "next_leverage_back",
             "eps_from_leverage", "cycle_assets", "max_error", "status"},
            {}};
    bool all_ok = true;
    for (std::size_t w = 0; w + 1 < chain.size(); ++w) {
        auto ctx = iso_context(chain, env, w);
        std::vector<Cell> row{static_cast<long long>(w), chain[w].id, chain[w + 1].id, ctx.assets};
        try {
            double eps = map_A_to_eps(ctx, ctx.assets);
            double a_back = map_eps_to_A(ctx, eps);
            double theta_back = map_eps_to_theta(ctx, eps);
            double eps2 = map_theta_to_eps(ctx, theta_back);
            double a_cycle = map_eps_to_A(ctx, eps2);
            double err = std::max({std::fabs(a_back - ctx.assets) / ctx.assets,
                                   std::fabs(theta_back - ctx.next_leverage), std::fabs(eps2 - eps),
                                   std::fabs(a_cycle - ctx.assets) / ctx.assets});
            bool ok = err < 1e-8;
            all_ok = all_ok && ok;
            row.insert(row.end(), {eps, a_back, theta_back, eps2, a_cycle, err, std::string(ok ? "ok" : "drift")});
        } catch (const Error& e) {
            all_ok = false;
            row.insert(row.end(), {std::string("-"), std::string("-"), std::string("-"), std::string("-"),
                                   std::string("-"), std::string("-"), std::string(e.what())});
        }
        t.rows.push_back(std::move(row));
    }
    r.meta = {{"all_round_trips_ok", all_ok}};
    r.tables.push_back(std::move(t));
    return r;
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::validation: return 1;
        case ErrorKind::solver: return 2;
        case ErrorKind::internal: return 3;
    }
    return 3;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fire-sale clearing, crowding-out analysis and perfection dynamics"};
    app.require_subcommand(1);
    Options o;
    std::string chosen;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("scenario", o.scenario, "scenario JSON file")->required();
        sub->add_option("--epsilon", o.epsilon, "override the common shock");
        sub->add_option("--beta", o.beta, "override price sensitivity");
        sub->add_option("--format", o.format, "table, json or csv")->check(CLI::IsMember({"table", "json", "csv"}));
        sub->add_option("--seed", o.seed, "override the RNG seed");
        sub->add_option("--threads", o.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
        sub->callback([&chosen, sub] { chosen = sub->get_name(); });
    };
    const std::vector<std::pair<const char*, const char*>> commands = {
        {"clear", "solve market clearing for the whole population"},
        {"cms", "liquidation of each bank facing the market alone"},
        {"coe", "crowding-out comparison against stand-alone and own-side markets"},
        {"decompose", "maximal bailout / bail-in clusters and residual"},
        {"chain", "leverage-ordered chain and its regular head"},
        {"perfect", "run the perfection dynamics to a stable state"},
        {"sweep", "sweep the shock or price sensitivity"},
        {"thresholds", "shock and price-sensitivity thresholds"},
        {"isocheck", "round trips of the asset / leverage / shock maps"},
    };
    std::map<std::string, CLI::App*> subs;
    for (auto [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub);
        subs[name] = sub;
    }
    subs["decompose"]->add_option("--sigma", o.sigma, "fraction of short residual banks to sample");
    subs["decompose"]->add_option("--sigma-bailin", o.sigma_bailin, "fraction of long residual banks to sample");
    subs["perfect"]->add_option("--max-epochs", o.max_epochs, "stop after this many epochs");
    subs["perfect"]->add_flag("--bailin-individual-exit", o.bailin_individual_exit,
                              "let long banks outside the bail-in cluster leave on their own");
    subs["sweep"]->add_option("--epsilon-range", o.epsilon_range, "from:to:step");
    subs["sweep"]->add_option("--beta-range", o.beta_range, "from:to:step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        std::string text = read_file(o.scenario);
        Scenario sc = parse_scenario(text);
        if (o.epsilon) sc.market.epsilon = *o.epsilon;
        if (o.beta) sc.market.beta = *o.beta;
        if (o.seed) sc.market.rng_seed = *o.seed;
        RunReport r = start(chosen.c_str(), sc, text);
        if (chosen == "clear") r = cmd_clear(sc, std::move(r));
        else if (chosen == "cms") r = cmd_cms(sc, std::move(r));
        else if (chosen == "coe") r = cmd_coe(sc, std::move(r));
        else if (chosen == "decompose") r = cmd_decompose(sc, o, std::move(r));
        else if (chosen == "chain") r = cmd_chain(sc, std::move(r));
        else if (chosen == "perfect") r = cmd_perfect(sc, o, std::move(r));
        else if (chosen == "sweep") r = cmd_sweep(sc, o, std::move(r));
        else if (chosen == "thresholds") r = cmd_thresholds(sc, std::move(r));
        else if (chosen == "isocheck") r = cmd_isocheck(sc, std::move(r));
        Format f = o.format == "json" ? Format::json : (o.format == "csv" ? Format::csv : Format::table);
        emit(r, f, out);
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace firesale::cli
