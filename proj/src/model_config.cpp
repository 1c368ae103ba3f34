#include "nlmarkov/model_config.hpp"

#include <memory>

namespace nlmarkov {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    fail(ErrorCode::InvalidParameters, "config error at " + path + ": " + what);
}

const json& need(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) config_error(path + "/" + key, "missing required field");
    return j.at(key);
}

Scalar need_number(const json& j, const std::string& path, const char* key) {
    const json& v = need(j, path, key);
    if (!v.is_number()) config_error(path + "/" + key, "expected a number");
    return v.get<Scalar>();
}

Vector parse_vector(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) config_error(path, "expected a nonempty array of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) config_error(path, "expected a number at index " + std::to_string(i));
        out(static_cast<Eigen::Index>(i)) = v[i].get<Scalar>();
    }
    return out;
}

Vector need_vector(const json& j, const std::string& path, const char* key) {
    return parse_vector(need(j, path, key), path + "/" + key);
}

Matrix need_matrix(const json& j, const std::string& path, const char* key) {
    const json& v = need(j, path, key);
    if (!v.is_array() || v.empty()) config_error(path + "/" + key, "expected an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(v.size());
    Matrix out;
    for (Eigen::Index i = 0; i < rows; ++i) {
        Vector row = parse_vector(v[static_cast<std::size_t>(i)],
                                  path + "/" + key + "[" + std::to_string(i) + "]");
        if (i == 0) out.resize(rows, row.size());
        if (row.size() != out.cols())
            config_error(path + "/" + key, "rows must have equal length");
        out.row(i) = row;
    }
    return out;
}

std::vector<Expression> need_expressions(const json& j, const std::string& path, const char* key) {
    const json& v = need(j, path, key);
    if (!v.is_array() || v.empty()) config_error(path + "/" + key, "expected an array of expression strings");
    std::vector<Expression> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string())
            config_error(path + "/" + key, "expected a string at index " + std::to_string(i));
        out.push_back(Expression::parse(v[i].get<std::string>()));
    }
    return out;
}

Expression need_expression(const json& j, const std::string& path, const char* key) {
    const json& v = need(j, path, key);
    if (!v.is_string()) config_error(path + "/" + key, "expected an expression string");
    return Expression::parse(v.get<std::string>());
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_to_json(m.row(i)));
    return out;
}

json expressions_to_json(const std::vector<Expression>& fns) {
    json out = json::array();
    for (const auto& f : fns) out.push_back(f.text());
    return out;
}

}  // namespace

ModelSpec model_spec_from_json(const json& doc) {
    const std::string path = "/model";
    if (!doc.is_object()) config_error(path, "expected an object");
    const json& tag = need(doc, path, "variant");
    if (!tag.is_string()) config_error(path + "/variant", "expected a string");
    const std::string variant = tag.get<std::string>();

    ModelSpec spec;
    if (doc.contains("label")) spec.label = doc.at("label").get<std::string>();

    if (variant == "constant") {
        ConstantSpec c;
        c.gamma = need_matrix(doc, path, "gamma");
        spec.value = std::move(c);
    } else if (variant == "gibbs_affine") {
        GibbsAffineSpec g;
        g.V = need_vector(doc, path, "V");
        g.W = need_matrix(doc, path, "W");
        g.beta = need_number(doc, path, "beta");
        if (doc.contains("adjacency")) g.adjacency = need_matrix(doc, path, "adjacency");
        spec.value = std::move(g);
    } else if (variant == "slow_adaptation") {
        SlowAdaptationSpec s;
        s.base = std::make_shared<ModelSpec>(model_spec_from_json(need(doc, path, "base")));
        s.pi_star = need_vector(doc, path, "pi_star");
        s.lambda = need_number(doc, path, "lambda");
        spec.value = std::move(s);
    } else if (variant == "birth_death_phi_psi") {
        BirthDeathPhiPsiSpec b;
        b.psi = need_expressions(doc, path, "psi");
        b.phi = need_expressions(doc, path, "phi");
        spec.value = std::move(b);
    } else if (variant == "metropolis_ggibbs") {
        MetropolisGGibbsSpec m;
        m.K = need_expressions(doc, path, "K");
        m.R = need_expressions(doc, path, "R");
        if (doc.contains("adjacency")) m.adjacency = need_matrix(doc, path, "adjacency");
        spec.value = std::move(m);
    } else if (variant == "three_state_b" || variant == "three_state_non_gibbs") {
        Scalar a1 = need_number(doc, path, "a1");
        Scalar a2 = need_number(doc, path, "a2");
        Scalar b2 = need_number(doc, path, "b2");
        Scalar b3 = need_number(doc, path, "b3");
        Scalar kappa = need_number(doc, path, "kappa");
        Vector c = need_vector(doc, path, "c");
        if (variant == "three_state_b") {
            ThreeStateBSpec t{a1, a2, b2, b3, kappa, c, std::nullopt};
            if (doc.contains("r_star")) t.r_star = need_vector(doc, path, "r_star");
            spec.value = std::move(t);
        } else {
            spec.value = ThreeStateNonGibbsSpec{a1, a2, b2, b3, kappa, c};
        }
    } else if (variant == "nearest_neighbor_cost") {
        NearestNeighborCostSpec n;
        n.d = static_cast<Eigen::Index>(need_number(doc, path, "d"));
        n.up = need_expressions(doc, path, "a");
        n.down = need_expressions(doc, path, "b");
        spec.value = std::move(n);
    } else if (variant == "telecom") {
        TelecomSpec t;
        t.capacity = static_cast<int>(need_number(doc, path, "capacity"));
        t.lambda = need_vector(doc, path, "lambda");
        t.mu = need_vector(doc, path, "mu");
        t.gamma = need_vector(doc, path, "gamma");
        const json& a = need(doc, path, "A");
        if (!a.is_array()) config_error(path + "/A", "expected an array of integers");
        for (const auto& x : a) t.requirement.push_back(x.get<int>());
        if (doc.contains("classes") &&
            doc.at("classes").get<int>() != static_cast<int>(t.requirement.size()))
            config_error(path + "/classes", "inconsistent with the number of per-class entries");
        spec.value = std::move(t);
    } else if (variant == "non_locally_gibbs") {
        spec.value = NonLocallyGibbsSpec{need_expression(doc, path, "a1"),
                                         need_expression(doc, path, "a2"),
                                         need_expression(doc, path, "psi")};
    } else {
        config_error(path + "/variant", "unknown variant '" + variant + "'");
    }
    if (spec.label.empty()) spec.label = variant_name(spec);
    return spec;
}

json model_spec_to_json(const ModelSpec& spec) {
    json doc;
    doc["variant"] = variant_name(spec);
    doc["label"] = spec.label;
    if (const auto* c = std::get_if<ConstantSpec>(&spec.value)) {
        doc["gamma"] = matrix_to_json(c->gamma);
    } else if (const auto* g = std::get_if<GibbsAffineSpec>(&spec.value)) {
        doc["V"] = vector_to_json(g->V);
        doc["W"] = matrix_to_json(g->W);
        doc["beta"] = g->beta;
        if (g->adjacency.size() != 0) doc["adjacency"] = matrix_to_json(g->adjacency);
    } else if (const auto* s = std::get_if<SlowAdaptationSpec>(&spec.value)) {
        doc["base"] = model_spec_to_json(*s->base);
        doc["pi_star"] = vector_to_json(s->pi_star);
        doc["lambda"] = s->lambda;
    } else if (const auto* b = std::get_if<BirthDeathPhiPsiSpec>(&spec.value)) {
        doc["psi"] = expressions_to_json(b->psi);
        doc["phi"] = expressions_to_json(b->phi);
    } else if (const auto* m = std::get_if<MetropolisGGibbsSpec>(&spec.value)) {
        doc["K"] = expressions_to_json(m->K);
        doc["R"] = expressions_to_json(m->R);
        if (m->adjacency.size() != 0) doc["adjacency"] = matrix_to_json(m->adjacency);
    } else if (const auto* t = std::get_if<ThreeStateBSpec>(&spec.value)) {
        doc["a1"] = t->a1;
        doc["a2"] = t->a2;
        doc["b2"] = t->b2;
        doc["b3"] = t->b3;
        doc["kappa"] = t->kappa;
        doc["c"] = vector_to_json(t->c);
        if (t->r_star.has_value()) doc["r_star"] = vector_to_json(*t->r_star);
    } else if (const auto* t = std::get_if<ThreeStateNonGibbsSpec>(&spec.value)) {
        doc["a1"] = t->a1;
        doc["a2"] = t->a2;
        doc["b2"] = t->b2;
        doc["b3"] = t->b3;
        doc["kappa"] = t->kappa;
        doc["c"] = vector_to_json(t->c);
    } else if (const auto* n = std::get_if<NearestNeighborCostSpec>(&spec.value)) {
        doc["d"] = static_cast<int>(n->d);
        doc["a"] = expressions_to_json(n->up);
        doc["b"] = expressions_to_json(n->down);
    } else if (const auto* t = std::get_if<TelecomSpec>(&spec.value)) {
        doc["capacity"] = t->capacity;
        doc["classes"] = static_cast<int>(t->requirement.size());
        doc["lambda"] = vector_to_json(t->lambda);
        doc["mu"] = vector_to_json(t->mu);
        doc["gamma"] = vector_to_json(t->gamma);
        doc["A"] = t->requirement;
    } else if (const auto* n = std::get_if<NonLocallyGibbsSpec>(&spec.value)) {
        doc["a1"] = n->a1.text();
        doc["a2"] = n->a2.text();
        doc["psi"] = n->psi.text();
    }
    return doc;
}

}  // namespace nlmarkov
