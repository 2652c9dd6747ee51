#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geobench/image.hpp"

namespace geobench {

inline constexpr int kDefaultJudgeRepeats = 3;
inline constexpr std::string_view kReferenceLabel = "REFERENCE";
inline constexpr std::string_view kPredictionLabel = "PREDICTION";

struct JudgeVerdict {
    std::vector<int> scores;
    double mean = 0;
    double std = 0;  // population
};

// Reference on the left, prediction on the right, both scaled to the taller
// height, with a label band above.
Image compose_contrastive(const Image& prediction, const Image& reference);
// Height of the label band added on top by compose_contrastive.
int label_band_height();

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    // One request: prompt plus a PNG. Returns the raw reply text. Throws
    // BackendUnavailable when the backend cannot be reached.
    virtual std::string ask(const std::string& prompt, std::span<const std::uint8_t> png) = 0;
};

// Replies cycle through a fixed list. Safe to share between threads.
class MockJudge final : public JudgeClient {
public:
    explicit MockJudge(std::vector<std::string> replies);
    static std::vector<std::string> score_replies(std::span<const int> scores);

    std::string ask(const std::string& prompt, std::span<const std::uint8_t> png) override;
    int calls() const { return calls_.load(); }
    std::optional<std::string> last_prompt() const;

private:
    std::vector<std::string> replies_;
    std::atomic<int> calls_{0};
    mutable std::mutex mutex_;
    std::optional<std::string> last_prompt_;
};

std::string judge_prompt(std::string_view task_description);
std::string judge_reask_prompt(std::string_view task_description);

// Accepts "Score: 85", "85/100" or a bare integer in [0, 100].
std::optional<int> parse_score(std::string_view reply);

JudgeVerdict aggregate_scores(std::vector<int> scores);

// Queries the backend `repeats` times. A reply without a score is re-asked
// once; a second miss raises UnparseableScore.
JudgeVerdict judge_pair(std::string_view task_description, const Image& contrastive, JudgeClient& backend,
                        int repeats = kDefaultJudgeRepeats);

} // namespace geobench
