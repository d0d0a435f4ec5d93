#include "firesale/scenario_io.hpp"

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace firesale::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::validation, where + ": " + what);
}

double number(const json& obj, const char* key, const std::string& where, std::optional<double> fallback = {}) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (fallback) return *fallback;
        fail(where, std::string("missing field '") + key + "'");
    }
    if (!it->is_number()) fail(where + "." + key, "expected a number");
    return it->get<double>();
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::validation, std::string("parse error: ") + e.what());
    }
    if (!doc.is_object()) fail("scenario", "expected an object");
    Scenario sc;

    auto banks = doc.find("banks");
    if (banks == doc.end() || !banks->is_array()) fail("scenario", "missing array 'banks'");
    for (std::size_t i = 0; i < banks->size(); ++i) {
        const auto& jb = (*banks)[i];
        std::string where = "banks[" + std::to_string(i) + "]";
        if (!jb.is_object()) fail(where, "expected an object");
        Bank b;
        auto id = jb.find("id");
        if (id == jb.end() || !id->is_string()) fail(where, "missing string field 'id'");
        b.id = id->get<std::string>();
        b.assets = number(jb, "assets", where);
        b.equity = number(jb, "equity", where);
        auto inv = jb.find("investments");
        if (inv == jb.end() || !inv->is_object()) fail(where, "missing object 'investments'");
        for (auto it = inv->begin(); it != inv->end(); ++it) {
            if (!it->is_number()) fail(where + ".investments." + it.key(), "expected a number");
            b.investments[it.key()] = it->get<double>();
        }
        sc.banks.push_back(std::move(b));
    }

    auto market = doc.find("market");
    if (market == doc.end() || !market->is_object()) fail("scenario", "missing object 'market'");
    auto& env = sc.market;
    env.beta = number(*market, "beta", "market");
    env.theta_bar = number(*market, "theta_bar", "market");
    env.epsilon = number(*market, "epsilon", "market", 0.0);
    env.p_switch = number(*market, "p_switch", "market", 1.0);
    if (auto m = market->find("modularity"); m != market->end()) {
        if (!m->is_string()) fail("market.modularity", "expected a string");
        auto v = m->get<std::string>();
        if (v == "submodular") env.modularity = Modularity::submodular;
        else if (v == "supermodular") env.modularity = Modularity::supermodular;
        else fail("market.modularity", "expected 'submodular' or 'supermodular', got '" + v + "'");
    }
    if (auto s = market->find("rng_seed"); s != market->end()) {
        if (!s->is_number_unsigned()) fail("market.rng_seed", "expected a non-negative integer");
        env.rng_seed = s->get<std::uint64_t>();
    }
    return sc;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::validation, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

std::string digest(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace firesale::cli
