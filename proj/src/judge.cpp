#include "geobench/judge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <stdexcept>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

namespace {

constexpr int kLabelScale = 2;
constexpr int kLabelPad = 6;
constexpr Rgb kBandColor{235, 235, 235};
constexpr Rgb kLabelColor{0, 0, 0};

Image scale_to_height(const Image& img, int height) {
    if (img.height() == height) return img;
    const int width = std::max(1, static_cast<int>(std::lround(
                                      static_cast<double>(img.width()) * height / img.height())));
    return resize_bilinear(img, width, height);
}

} // namespace

int label_band_height() { return text_height(kLabelScale) + 2 * kLabelPad; }

Image compose_contrastive(const Image& prediction, const Image& reference) {
    if (prediction.empty() || reference.empty()) throw UndecodableImage("cannot compose an empty image");
    const int h = std::max(prediction.height(), reference.height());
    const auto left = scale_to_height(reference, h);
    const auto right = scale_to_height(prediction, h);
    const int band = label_band_height();

    Image out(left.width() + right.width(), band + h);
    out.fill_rect(0, 0, out.width(), band, kBandColor);
    out.blit(left, 0, band);
    out.blit(right, left.width(), band);
    draw_text(out, kLabelPad, kLabelPad, kReferenceLabel, kLabelColor, kLabelScale);
    draw_text(out, left.width() + kLabelPad, kLabelPad, kPredictionLabel, kLabelColor, kLabelScale);
    return out;
}

MockJudge::MockJudge(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) throw std::invalid_argument("mock judge needs at least one reply");
}

std::vector<std::string> MockJudge::score_replies(std::span<const int> scores) {
    std::vector<std::string> replies;
    for (int s : scores) replies.push_back(fmt::format("Score: {}", s));
    return replies;
}

std::string MockJudge::ask(const std::string& prompt, std::span<const std::uint8_t>) {
    const int n = calls_.fetch_add(1);
    {
        std::lock_guard lock(mutex_);
        last_prompt_ = prompt;
    }
    return replies_[static_cast<std::size_t>(n) % replies_.size()];
}

std::optional<std::string> MockJudge::last_prompt() const {
    std::lock_guard lock(mutex_);
    return last_prompt_;
}

std::string judge_prompt(std::string_view task_description) {
    return fmt::format(
        "You are grading a map produced by a GIS agent.\n"
        "The image has two panels. The left panel, labeled {}, is the correct map. "
        "The right panel, labeled {}, is the map under evaluation.\n\n"
        "Task given to the agent:\n{}\n\n"
        "Compare the right panel with the left one on two dimensions:\n"
        "1. Data and Spatial Accuracy: the right features, extent, geometry and values are shown.\n"
        "2. Cartographic Style Adherence: colors, symbology, transparency, title and layout follow "
        "the task.\n\n"
        "Weigh both dimensions and give one overall score from 0 (unrelated or missing) to 100 "
        "(indistinguishable from the reference). Explain briefly, then end with a line of the form\n"
        "Score: <integer>",
        kReferenceLabel, kPredictionLabel, task_description);
}

std::string judge_reask_prompt(std::string_view task_description) {
    return judge_prompt(task_description) +
           "\n\nYour previous reply did not contain a score. Reply with the line 'Score: <integer>' only.";
}

std::optional<int> parse_score(std::string_view reply) {
    const std::string text(reply);
    static const std::regex labelled(R"(score\s*[:=]\s*\**\s*(\d{1,3})\b)", std::regex::icase);
    static const std::regex ratio(R"((\d{1,3})\s*/\s*100\b)");
    static const std::regex bare(R"(\s*\**(\d{1,3})\**\s*\.?\s*)");

    auto in_range = [](const std::string& digits) -> std::optional<int> {
        const int v = std::stoi(digits);
        if (v < 0 || v > 100) return std::nullopt;
        return v;
    };
    // The last labelled score wins: replies often restate the scale first.
    std::optional<int> found;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), labelled); it != std::sregex_iterator(); ++it) {
        found = in_range((*it)[1]);
    }
    if (found) return found;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), ratio); it != std::sregex_iterator(); ++it) {
        found = in_range((*it)[1]);
    }
    if (found) return found;
    std::smatch m;
    if (std::regex_match(text, m, bare)) return in_range(m[1]);
    return std::nullopt;
}

JudgeVerdict aggregate_scores(std::vector<int> scores) {
    if (scores.empty()) throw std::invalid_argument("no scores to aggregate");
    JudgeVerdict v;
    v.scores = std::move(scores);
    const double n = static_cast<double>(v.scores.size());
    v.mean = std::accumulate(v.scores.begin(), v.scores.end(), 0.0) / n;
    double ss = 0;
    for (int s : v.scores) ss += (s - v.mean) * (s - v.mean);
    v.std = std::sqrt(ss / n);
    return v;
}

JudgeVerdict judge_pair(std::string_view task_description, const Image& contrastive, JudgeClient& backend,
                        int repeats) {
    if (repeats < 1) throw std::invalid_argument("judge repeats must be at least 1");
    const auto png = encode_png(contrastive);
    const auto prompt = judge_prompt(task_description);
    std::vector<int> scores;
    for (int i = 0; i < repeats; ++i) {
        auto reply = backend.ask(prompt, png);
        auto score = parse_score(reply);
        if (!score) {
            reply = backend.ask(judge_reask_prompt(task_description), png);
            score = parse_score(reply);
        }
        if (!score) {
            throw UnparseableScore(fmt::format("judge reply has no score in [0, 100]: '{}'",
                                               reply.substr(0, 200)));
        }
        scores.push_back(*score);
    }
    return aggregate_scores(std::move(scores));
}

} // namespace geobench
