#include "promptweight/objective.hpp"

#include <cstdio>

#include "promptweight/errors.hpp"
#include "promptweight/model.hpp"
#include "promptweight/numeric.hpp"

namespace promptweight {

double derive_a(const VqaCell& cell, Sign label) {
    const int valid = cell.yes + cell.no;
    if (valid == 0) return 0.0;
    const int correct = label == Sign::Positive ? cell.yes : cell.no;
    return static_cast<double>(correct) / valid;
}

double derive_b(const ItrCell& cell) { return cell.mean(); }

double weighted_rate(std::span<const double> w, std::span<const double> row) {
    if (w.size() != row.size()) throw MismatchError("weight and value lengths differ");
    CompensatedSum num, den;
    for (std::size_t i = 0; i < w.size(); ++i) {
        num.add(w[i] * row[i]);
        den.add(w[i]);
    }
    if (!(den.value() > 0.0)) throw ZeroWeightSumError();
    return num.value() / den.value();
}

ScoreTable ScoreTable::from(const ScoreMatrix& m, const PromptSet& ps) {
    require_consistent(m, ps);
    ScoreTable t;
    t.task_ = m.task;
    t.n_prompts_ = m.n_prompts();
    t.values_.reserve(m.n_images() * m.n_prompts());
    for (const auto& img : m.images) {
        t.labels_.push_back(img.label);
        t.image_ids_.push_back(img.id);
        for (std::size_t i = 0; i < img.cells.size(); ++i) {
            if (m.task == Task::Vqa) {
                t.values_.push_back(derive_a(std::get<VqaCell>(img.cells[i]), img.label));
            } else {
                t.values_.push_back(to_int(ps.prompts[i].polarity) *
                                    derive_b(std::get<ItrCell>(img.cells[i])));
            }
        }
    }
    return t;
}

namespace {

void check_weights(std::span<const double> w, const ScoreTable& t) {
    if (w.size() != t.n_prompts())
        throw MismatchError("expected " + std::to_string(t.n_prompts()) + " weights, got " +
                            std::to_string(w.size()));
}

double weight_sum(std::span<const double> w) {
    CompensatedSum s;
    for (double x : w) s.add(x);
    if (!(s.value() > 0.0)) throw ZeroWeightSumError();
    return s.value();
}

double dot(std::span<const double> w, std::span<const double> row) {
    CompensatedSum s;
    for (std::size_t i = 0; i < w.size(); ++i) s.add(w[i] * row[i]);
    return s.value();
}

double score_with_sum(std::span<const double> w, const ScoreTable& t, std::size_t j, double wsum) {
    const double normalized = dot(w, t.row(j)) / wsum;
    return t.task() == Task::Vqa ? normalized : to_int(t.label(j)) * normalized;
}

bool is_correct(Task task, double score) {
    return task == Task::Vqa ? score > kVqaThreshold : score > kItrThreshold;
}

ObjectiveReport report(std::span<const double> w, const ScoreTable& t, double coeff) {
    check_weights(w, t);
    const double wsum = weight_sum(w);
    ObjectiveReport r;
    CompensatedSum soft;
    for (std::size_t j = 0; j < t.n_images(); ++j) {
        const double s = score_with_sum(w, t, j, wsum);
        const bool ok = is_correct(t.task(), s);
        r.correct_count += ok ? 1 : 0;
        soft.add(s);
        r.per_image.push_back({t.image_id(j), s, ok});
    }
    r.soft_term = soft.value();
    r.total = r.correct_count + coeff * r.soft_term;
    return r;
}

}  // namespace

double polarity_sum(std::span<const double> w, const ScoreTable& t, std::size_t j) {
    if (t.task() != Task::Itr) throw MismatchError("polarity_sum needs an ITR table");
    check_weights(w, t);
    return dot(w, t.row(j));
}

double weighted_margin(std::span<const double> w, const ScoreTable& t, std::size_t j) {
    if (t.task() != Task::Itr) throw MismatchError("weighted_margin needs an ITR table");
    check_weights(w, t);
    return score_with_sum(w, t, j, weight_sum(w));
}

double image_score(std::span<const double> w, const ScoreTable& t, std::size_t j) {
    check_weights(w, t);
    return score_with_sum(w, t, j, weight_sum(w));
}

ObjectiveReport e_vqa(std::span<const double> w, const ScoreTable& t, double alpha) {
    if (t.task() != Task::Vqa) throw MismatchError("E_VQA needs a VQA score table");
    return report(w, t, alpha);
}

ObjectiveReport e_itr(std::span<const double> w, const ScoreTable& t, double beta) {
    if (t.task() != Task::Itr) throw MismatchError("E_ITR needs an ITR score table");
    return report(w, t, beta);
}

ObjectiveReport evaluate_objective(std::span<const double> w, const ScoreTable& t, double coeff) {
    return report(w, t, coeff);
}

double objective_value(std::span<const double> w, const ScoreTable& t, double coeff) {
    check_weights(w, t);
    const double wsum = weight_sum(w);
    int correct = 0;
    CompensatedSum soft;
    for (std::size_t j = 0; j < t.n_images(); ++j) {
        const double s = score_with_sum(w, t, j, wsum);
        correct += is_correct(t.task(), s) ? 1 : 0;
        soft.add(s);
    }
    return correct + coeff * soft.value();
}

double accuracy(std::span<const double> w, const ScoreTable& t) {
    if (t.n_images() == 0) return 0.0;
    return static_cast<double>(report(w, t, 0.0).correct_count) / t.n_images();
}

std::string format_percent(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", rate * 100.0);
    return buf;
}

}  // namespace promptweight
