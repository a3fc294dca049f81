#include "promptweight/model.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "promptweight/errors.hpp"
#include "promptweight/numeric.hpp"

namespace promptweight {

using json = nlohmann::ordered_json;

std::string to_string(Task t) { return t == Task::Vqa ? "vqa" : "itr"; }

std::string to_string(Method m) {
    switch (m) {
        case Method::Opt: return "opt";
        case Method::One: return "one";
        case Method::All: return "all";
    }
    return "?";
}

Task parse_task(const std::string& s) {
    if (s == "vqa") return Task::Vqa;
    if (s == "itr") return Task::Itr;
    throw ParseError("task: expected \"vqa\" or \"itr\", got \"" + s + "\"");
}

Method parse_method(const std::string& s) {
    if (s == "opt") return Method::Opt;
    if (s == "one") return Method::One;
    if (s == "all") return Method::All;
    throw ParseError("method: expected \"opt\", \"one\" or \"all\", got \"" + s + "\"");
}

double ItrCell::mean() const {
    if (sims.empty()) return 0.0;
    CompensatedSum sum;
    for (double x : sims) sum.add(x);
    return sum.value() / static_cast<double>(sims.size());
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_prompt_set(const PromptSet& ps) {
    std::vector<Violation> out;
    if (ps.prompts.size() < 2)
        out.push_back({"prompts", "min_size", "a prompt set needs at least 2 prompts"});

    std::set<std::string> ids;
    int positive = 0, negative = 0;
    std::map<std::string, std::vector<const Prompt*>> pairs;
    for (const auto& p : ps.prompts) {
        if (!ids.insert(p.id).second)
            out.push_back({p.id, "unique_id", "duplicate prompt id"});
        if (p.text.empty())
            out.push_back({p.id, "non_empty_text", "prompt text is empty"});
        (p.polarity == Sign::Positive ? positive : negative)++;
        if (p.pair_id) pairs[*p.pair_id].push_back(&p);
    }
    if (positive != negative) {
        out.push_back({"prompts", "polarity_balance",
                       "polarity counts differ: " + std::to_string(positive) + " positive vs " +
                           std::to_string(negative) + " negative"});
    }
    for (const auto& [pair, members] : pairs) {
        if (members.size() != 2 || members[0]->polarity == members[1]->polarity) {
            out.push_back({members.front()->id, "pair",
                           "pair_id \"" + pair +
                               "\" must link exactly two prompts of opposite polarity"});
        }
    }
    return out;
}

std::vector<Violation> validate_manifest(const DatasetManifest& ds) {
    std::vector<Violation> out;
    const auto n = ds.images.size();
    if (n < 2 || n % 2 != 0)
        out.push_back({"images", "even_size", "dataset needs an even number (>= 2) of images"});
    std::set<std::string> ids;
    int positive = 0;
    for (const auto& img : ds.images) {
        if (!ids.insert(img.id).second) out.push_back({img.id, "unique_id", "duplicate image id"});
        if (img.label == Sign::Positive) ++positive;
    }
    if (!ds.allow_unbalanced && static_cast<std::size_t>(positive) * 2 != n) {
        out.push_back({"images", "label_balance",
                       "labels are unbalanced: " + std::to_string(positive) + " of " +
                           std::to_string(n) + " are +1"});
    }
    return out;
}

std::vector<Violation> validate_matrix(const ScoreMatrix& m) {
    std::vector<Violation> out;
    if (m.n_rand < 1) out.push_back({"n_rand", "positive", "n_rand must be >= 1"});
    std::set<std::string> pids;
    for (const auto& id : m.prompt_ids)
        if (!pids.insert(id).second) out.push_back({id, "unique_id", "duplicate prompt id"});
    std::set<std::string> iids;
    for (const auto& img : m.images) {
        if (!iids.insert(img.id).second) out.push_back({img.id, "unique_id", "duplicate image id"});
        if (img.cells.size() != m.prompt_ids.size()) {
            out.push_back({img.id, "cell_count",
                           "expected " + std::to_string(m.prompt_ids.size()) + " cells, got " +
                               std::to_string(img.cells.size())});
            continue;
        }
        for (std::size_t i = 0; i < img.cells.size(); ++i) {
            const std::string subject = img.id + "/" + m.prompt_ids[i];
            if (m.task == Task::Vqa) {
                const auto* c = std::get_if<VqaCell>(&img.cells[i]);
                if (!c) {
                    out.push_back({subject, "cell_kind", "VQA matrix holds a non-VQA cell"});
                } else if (c->yes < 0 || c->no < 0 || c->invalid < 0 || c->total() != m.n_rand) {
                    out.push_back({subject, "cell_counts",
                                   "counts must be nonnegative and sum to n_rand"});
                }
            } else {
                const auto* c = std::get_if<ItrCell>(&img.cells[i]);
                if (!c) {
                    out.push_back({subject, "cell_kind", "ITR matrix holds a non-ITR cell"});
                    continue;
                }
                if (c->sims.size() != static_cast<std::size_t>(m.n_rand))
                    out.push_back({subject, "cell_length", "similarity list length != n_rand"});
                for (double s : c->sims) {
                    if (!(s >= -1.0 && s <= 1.0)) {
                        out.push_back({subject, "similarity_range", "similarity outside [-1, 1]"});
                        break;
                    }
                }
            }
        }
    }
    return out;
}

std::vector<Violation> validate_weights(std::span<const double> w) {
    std::vector<Violation> out;
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] >= 0.0 && w[i] <= 1.0)) {
            std::ostringstream os;
            os << "w_" << i << " = " << w[i] << " violates 0 <= w_i <= 1";
            out.push_back({"weights[" + std::to_string(i) + "]", "weight_bounds", os.str()});
        } else {
            sum += w[i];
        }
    }
    if (out.empty() && !(sum > 0.0))
        out.push_back({"weights", "positive_sum", "weights sum to zero"});
    return out;
}

std::vector<Violation> validate_ga_config(const GAConfig& cfg) {
    std::vector<Violation> out;
    auto prob = [&](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            out.push_back({name, "probability", std::string(name) + " must lie in [0, 1]"});
    };
    if (cfg.tournament_size < 1)
        out.push_back({"tournament_size", "positive", "tournament_size must be >= 1"});
    if (cfg.population < cfg.tournament_size)
        out.push_back({"population", "min_size", "population must be >= tournament_size"});
    if (cfg.generations < 0)
        out.push_back({"generations", "nonnegative", "generations must be >= 0"});
    prob(cfg.crossover_prob, "crossover_prob");
    prob(cfg.mutation_prob, "mutation_prob");
    prob(cfg.mutation_gene_prob, "mutation_gene_prob");
    if (!(cfg.mutation_sigma > 0.0))
        out.push_back({"mutation_sigma", "positive", "mutation_sigma must be > 0"});
    if (!(cfg.blend_alpha >= 0.0))
        out.push_back({"blend_alpha", "nonnegative", "blend_alpha must be >= 0"});
    return out;
}

std::vector<Violation> validate_recognizer(const Recognizer& r) {
    auto out = validate_prompt_set(r.prompt_set);
    if (r.prompt_set.task != r.task)
        out.push_back({"task", "task_match", "recognizer task differs from prompt set task"});
    if (r.weights.size() != r.prompt_set.size()) {
        out.push_back({"weights", "length", "weights length differs from prompt count"});
        return out;
    }
    auto wv = validate_weights(r.weights);
    out.insert(out.end(), wv.begin(), wv.end());
    if (!wv.empty()) return out;

    if (r.method == Method::All &&
        !std::all_of(r.weights.begin(), r.weights.end(), [](double w) { return w == 1.0; })) {
        out.push_back({"weights", "all_equal", "ALL recognizer must weight every prompt 1"});
    }
    if (r.method == Method::One) {
        std::vector<std::size_t> nz;
        for (std::size_t i = 0; i < r.weights.size(); ++i)
            if (r.weights[i] != 0.0) nz.push_back(i);
        const bool ok = r.task == Task::Vqa
                            ? nz.size() == 1
                            : nz.size() == 2 && r.prompt_set.prompts[nz[0]].polarity !=
                                                    r.prompt_set.prompts[nz[1]].polarity;
        if (!ok)
            out.push_back({"weights", "one_support",
                           r.task == Task::Vqa
                               ? "ONE recognizer must have exactly one nonzero weight"
                               : "ONE recognizer must weight exactly one opposite-polarity pair"});
    }
    return out;
}

void require_valid(const std::vector<Violation>& violations, std::string_view what) {
    if (violations.empty()) return;
    std::string msg = "invalid " + std::string(what) + ":";
    for (const auto& v : violations) msg += " [" + v.subject + ": " + v.message + "]";
    throw InvariantError(msg);
}

void require_consistent(const ScoreMatrix& m, const PromptSet& ps) {
    if (m.task != ps.task)
        throw MismatchError("matrix task " + to_string(m.task) + " differs from prompt set task " +
                            to_string(ps.task));
    if (m.prompt_ids.size() != ps.size())
        throw MismatchError("matrix has " + std::to_string(m.prompt_ids.size()) +
                            " prompts, prompt set has " + std::to_string(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (m.prompt_ids[i] != ps.prompts[i].id)
            throw MismatchError("prompt " + std::to_string(i) + ": matrix id \"" +
                                m.prompt_ids[i] + "\" vs prompt set id \"" + ps.prompts[i].id +
                                "\"");
    }
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace {

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

const json& field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) throw ParseError(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(path + "." + key + ": missing field");
    return *it;
}

template <typename T>
T as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ParseError(path + ": wrong type");
    }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
    return as<T>(field(j, key, path), path + "." + key);
}

void check_version(const json& j) {
    const auto& v = field(j, "version", "$");
    if (!v.is_string()) throw ParseError("$.version: expected a string");
    if (v.get<std::string>() != kFormatVersion)
        throw VersionError("unsupported format version \"" + v.get<std::string>() + "\"");
}

Sign sign_from(const json& j, const std::string& path) {
    const int v = as<int>(j, path);
    if (v == 1) return Sign::Positive;
    if (v == -1) return Sign::Negative;
    throw InvariantError(path + ": expected +1 or -1, got " + std::to_string(v));
}

json prompt_json(const Prompt& p) {
    json o;
    o["id"] = p.id;
    o["text"] = p.text;
    o["polarity"] = to_int(p.polarity);
    if (p.pair_id) o["pair_id"] = *p.pair_id;
    return o;
}

Prompt prompt_from(const json& j, const std::string& path) {
    Prompt p;
    p.id = get<std::string>(j, "id", path);
    p.text = get<std::string>(j, "text", path);
    p.polarity = sign_from(field(j, "polarity", path), path + ".polarity");
    if (auto it = j.find("pair_id"); it != j.end() && !it->is_null())
        p.pair_id = as<std::string>(*it, path + ".pair_id");
    return p;
}

std::vector<Prompt> prompts_from(const json& arr, const std::string& path) {
    if (!arr.is_array()) throw ParseError(path + ": expected an array");
    std::vector<Prompt> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back(prompt_from(arr[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json ga_json(const GAConfig& c) {
    json o;
    o["population"] = c.population;
    o["generations"] = c.generations;
    o["crossover_prob"] = c.crossover_prob;
    o["mutation_prob"] = c.mutation_prob;
    o["mutation_sigma"] = c.mutation_sigma;
    o["mutation_gene_prob"] = c.mutation_gene_prob;
    o["blend_alpha"] = c.blend_alpha;
    o["tournament_size"] = c.tournament_size;
    o["rng_seed"] = c.rng_seed;
    o["seed_population"] = c.seed_population;
    return o;
}

GAConfig ga_from(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path + ": expected an object");
    GAConfig c;
    auto opt = [&](const char* key, auto& dst) {
        if (auto it = j.find(key); it != j.end())
            dst = as<std::decay_t<decltype(dst)>>(*it, path + "." + key);
    };
    opt("population", c.population);
    opt("generations", c.generations);
    opt("crossover_prob", c.crossover_prob);
    opt("mutation_prob", c.mutation_prob);
    opt("mutation_sigma", c.mutation_sigma);
    opt("mutation_gene_prob", c.mutation_gene_prob);
    opt("blend_alpha", c.blend_alpha);
    opt("tournament_size", c.tournament_size);
    opt("rng_seed", c.rng_seed);
    opt("seed_population", c.seed_population);
    return c;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

std::string serialize(const PromptSet& ps) {
    json o;
    o["version"] = kFormatVersion;
    o["task"] = to_string(ps.task);
    o["prompts"] = json::array();
    for (const auto& p : ps.prompts) o["prompts"].push_back(prompt_json(p));
    return dump(o);
}

PromptSet parse_prompt_set(std::string_view text) {
    const json j = parse_json(text);
    check_version(j);
    PromptSet ps;
    ps.task = parse_task(get<std::string>(j, "task", "$"));
    ps.prompts = prompts_from(field(j, "prompts", "$"), "$.prompts");
    require_valid(validate_prompt_set(ps), "prompt set");
    return ps;
}

std::string serialize(const DatasetManifest& ds) {
    json o;
    o["version"] = kFormatVersion;
    o["name"] = ds.name;
    o["split"] = ds.split == Split::Opt ? "opt" : "eval";
    if (ds.allow_unbalanced) o["allow_unbalanced"] = true;
    o["images"] = json::array();
    for (const auto& img : ds.images)
        o["images"].push_back({{"id", img.id}, {"path", img.path}, {"label", to_int(img.label)}});
    return dump(o);
}

DatasetManifest parse_manifest(std::string_view text) {
    const json j = parse_json(text);
    check_version(j);
    DatasetManifest ds;
    ds.name = get<std::string>(j, "name", "$");
    const auto split = get<std::string>(j, "split", "$");
    if (split == "opt")
        ds.split = Split::Opt;
    else if (split == "eval")
        ds.split = Split::Eval;
    else
        throw ParseError("$.split: expected \"opt\" or \"eval\"");
    if (auto it = j.find("allow_unbalanced"); it != j.end())
        ds.allow_unbalanced = as<bool>(*it, "$.allow_unbalanced");
    const auto& arr = field(j, "images", "$");
    if (!arr.is_array()) throw ParseError("$.images: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "$.images[" + std::to_string(i) + "]";
        LabeledImage img;
        img.id = get<std::string>(arr[i], "id", path);
        img.path = get<std::string>(arr[i], "path", path);
        img.label = sign_from(field(arr[i], "label", path), path + ".label");
        ds.images.push_back(std::move(img));
    }
    require_valid(validate_manifest(ds), "dataset manifest");
    return ds;
}

std::string serialize(const ScoreMatrix& m) {
    json o;
    o["version"] = kFormatVersion;
    o["task"] = to_string(m.task);
    o["n_rand"] = m.n_rand;
    o["prompt_ids"] = m.prompt_ids;
    o["images"] = json::array();
    for (const auto& img : m.images) {
        json cells = json::array();
        for (const auto& cell : img.cells) {
            if (const auto* v = std::get_if<VqaCell>(&cell))
                cells.push_back({{"yes", v->yes}, {"no", v->no}, {"invalid", v->invalid}});
            else
                cells.push_back({{"sims", std::get<ItrCell>(cell).sims}});
        }
        o["images"].push_back(
            {{"id", img.id}, {"label", to_int(img.label)}, {"cells", std::move(cells)}});
    }
    o["provenance"] = {{"backend", m.provenance.backend}, {"seed", m.provenance.seed}};
    return dump(o);
}

ScoreMatrix parse_matrix(std::string_view text) {
    const json j = parse_json(text);
    check_version(j);
    ScoreMatrix m;
    m.task = parse_task(get<std::string>(j, "task", "$"));
    m.n_rand = get<int>(j, "n_rand", "$");
    m.prompt_ids = get<std::vector<std::string>>(j, "prompt_ids", "$");
    const auto& arr = field(j, "images", "$");
    if (!arr.is_array()) throw ParseError("$.images: expected an array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string path = "$.images[" + std::to_string(k) + "]";
        ImageRecord rec;
        rec.id = get<std::string>(arr[k], "id", path);
        rec.label = sign_from(field(arr[k], "label", path), path + ".label");
        const auto& cells = field(arr[k], "cells", path);
        if (!cells.is_array()) throw ParseError(path + ".cells: expected an array");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::string cpath = path + ".cells[" + std::to_string(i) + "]";
            if (cells[i].contains("sims")) {
                rec.cells.emplace_back(ItrCell{get<std::vector<double>>(cells[i], "sims", cpath)});
            } else {
                rec.cells.emplace_back(VqaCell{get<int>(cells[i], "yes", cpath),
                                               get<int>(cells[i], "no", cpath),
                                               get<int>(cells[i], "invalid", cpath)});
            }
        }
        m.images.push_back(std::move(rec));
    }
    const auto& prov = field(j, "provenance", "$");
    m.provenance.backend = get<std::string>(prov, "backend", "$.provenance");
    m.provenance.seed = get<std::uint64_t>(prov, "seed", "$.provenance");
    require_valid(validate_matrix(m), "score matrix");
    return m;
}

std::string serialize(const Recognizer& r) {
    json o;
    o["version"] = kFormatVersion;
    o["task"] = to_string(r.task);
    o["method"] = to_string(r.method);
    o["coefficient"] = r.coefficient;
    o["prompts"] = json::array();
    for (const auto& p : r.prompt_set.prompts) o["prompts"].push_back(prompt_json(p));
    o["weights"] = r.weights;
    json prov;
    prov["ga"] = r.provenance.ga ? ga_json(*r.provenance.ga) : json(nullptr);
    prov["dataset_hash"] = r.provenance.dataset_hash;
    if (!r.provenance.created.empty()) prov["created"] = r.provenance.created;
    o["provenance"] = std::move(prov);
    return dump(o);
}

Recognizer parse_recognizer(std::string_view text) {
    const json j = parse_json(text);
    check_version(j);
    Recognizer r;
    r.task = parse_task(get<std::string>(j, "task", "$"));
    r.method = parse_method(get<std::string>(j, "method", "$"));
    r.coefficient = get<double>(j, "coefficient", "$");
    r.prompt_set.task = r.task;
    r.prompt_set.prompts = prompts_from(field(j, "prompts", "$"), "$.prompts");
    r.weights = get<std::vector<double>>(j, "weights", "$");
    const auto& prov = field(j, "provenance", "$");
    if (auto it = prov.find("ga"); it != prov.end() && !it->is_null())
        r.provenance.ga = ga_from(*it, "$.provenance.ga");
    if (auto it = prov.find("dataset_hash"); it != prov.end())
        r.provenance.dataset_hash = as<std::string>(*it, "$.provenance.dataset_hash");
    if (auto it = prov.find("created"); it != prov.end())
        r.provenance.created = as<std::string>(*it, "$.provenance.created");
    require_valid(validate_recognizer(r), "recognizer");
    return r;
}

std::string serialize(const GAConfig& cfg) { return dump(ga_json(cfg)); }

GAConfig parse_ga_config(std::string_view text) {
    GAConfig cfg = ga_from(parse_json(text), "$");
    require_valid(validate_ga_config(cfg), "GA config");
    return cfg;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

namespace {
template <typename F>
auto load_with_context(const std::filesystem::path& path, F parse) {
    const std::string text = read_file(path);
    try {
        return parse(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const VersionError& e) {
        throw VersionError(path.string() + ": " + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError(path.string() + ": " + e.what());
    }
}
}  // namespace

PromptSet load_prompt_set(const std::filesystem::path& p) { return load_with_context(p, parse_prompt_set); }
DatasetManifest load_manifest(const std::filesystem::path& p) { return load_with_context(p, parse_manifest); }
ScoreMatrix load_matrix(const std::filesystem::path& p) { return load_with_context(p, parse_matrix); }
Recognizer load_recognizer(const std::filesystem::path& p) { return load_with_context(p, parse_recognizer); }
GAConfig load_ga_config(const std::filesystem::path& p) { return load_with_context(p, parse_ga_config); }

std::string content_hash(const ScoreMatrix& m) {
    const std::string text = serialize(m);
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xF]);
    }
    return out;
}

}  // namespace promptweight
