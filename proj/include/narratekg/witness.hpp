#pragma once

// Witness assessment: deciding whether a document supports a subjective
// attribution for a participant.
//
// An Assessor answers an open question ("Who was an aggressor in <event>?")
// against one document and canonicalizes the answer to a participant. The
// BaselineAssessor is a deterministic lexicon matcher; RemoteAssessor talks
// to a model-backed service over HTTP. evaluate_witnesses() turns per-
// document answers into a verdict using a confidence threshold and a
// minimum witness count.

#include "narratekg/corpus.hpp"
#include "narratekg/error.hpp"
#include "narratekg/model.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace narratekg {

inline constexpr std::string_view kEventMask = "<EVENT_MASK>";

/// Replaces the single event mask in `question_template`. Throws
/// SchemaError unless the template contains exactly one mask.
std::string instantiate_template(std::string_view question_template, std::string_view event_label);

struct Candidate {
    EntityId id;
    std::vector<std::string> aliases;  // includes the entity name
    bool operator==(const Candidate&) const = default;
};

struct AssessmentRequest {
    const Document* document = nullptr;
    std::string attribution;
    std::string question;
    std::vector<Candidate> candidates;
    std::optional<EntityId> required_participant;
};

struct AssessmentResult {
    std::string answer_phrase;
    double confidence = 0.0;
    std::optional<EntityId> canonical_target;
    double similarity = 0.0;
    bool operator==(const AssessmentResult&) const = default;
};

class AssessorError : public Error {
public:
    using Error::Error;
};
class AssessorConnectionError : public AssessorError {
public:
    using AssessorError::AssessorError;
};
class AssessorTimeoutError : public AssessorError {
public:
    using AssessorError::AssessorError;
};
class MalformedResponseError : public AssessorError {
public:
    using AssessorError::AssessorError;
};

/// Implementations must be safe for concurrent assess() calls.
class Assessor {
public:
    virtual ~Assessor() = default;
    virtual AssessmentResult assess(const AssessmentRequest& request) const = 0;
    virtual std::string name() const = 0;
};

struct Canonicalization {
    std::optional<EntityId> target;
    double similarity = 0.0;
};

/// Picks the candidate with an alias most similar to `phrase` (trigram
/// cosine). Ties go to the earlier candidate. No target when the best
/// similarity is below `threshold` or the phrase is empty.
Canonicalization canonicalize(std::string_view phrase, std::span<const Candidate> candidates, double threshold = 0.5);

struct BaselineConfig {
    /// attribution -> signal phrases
    std::map<std::string, std::vector<std::string>> lexicon;
    std::vector<std::string> negation_cues;
    /// Tokens preceding a signal phrase that are searched for negation cues.
    std::size_t negation_window = 8;
    double canonicalization_threshold = 0.5;

    static BaselineConfig defaults();
};

/// Lexicon matcher. For every signal phrase hit that is not preceded by a
/// negation cue within the window, the nearest candidate alias in the same
/// sentence is the answer; confidence decays with the token distance
/// (0.95 * 0.9^gap). The best hit wins, earliest on ties.
class BaselineAssessor : public Assessor {
public:
    explicit BaselineAssessor(BaselineConfig config = BaselineConfig::defaults());
    AssessmentResult assess(const AssessmentRequest& request) const override;
    std::string name() const override { return "baseline"; }
    const BaselineConfig& config() const noexcept { return config_; }

private:
    BaselineConfig config_;
    std::map<std::string, std::vector<std::vector<std::string>>> signals_;
    std::vector<std::vector<std::string>> negations_;
};

/// Client for the assessment service (POST /assess, GET /healthz).
class RemoteAssessor : public Assessor {
public:
    RemoteAssessor(std::string base_url, std::chrono::milliseconds timeout);
    AssessmentResult assess(const AssessmentRequest& request) const override;
    std::string name() const override { return "remote:" + base_url_; }
    bool healthy() const;

private:
    std::string base_url_;
    std::chrono::milliseconds timeout_;
};

/// Adds a fixed latency to every call, modelling an expensive model.
class DelayedAssessor : public Assessor {
public:
    DelayedAssessor(const Assessor& inner, std::chrono::microseconds delay) : inner_(inner), delay_(delay) {}
    AssessmentResult assess(const AssessmentRequest& request) const override;
    std::string name() const override { return inner_.name() + "+delay"; }

private:
    const Assessor& inner_;
    std::chrono::microseconds delay_;
};

/// Wire encoding of the assessment protocol.
std::string encode_assess_request(const AssessmentRequest& request);
/// Validates a response body against the schema and candidate set. Throws
/// MalformedResponseError.
AssessmentResult decode_assess_response(std::string_view body, std::span<const Candidate> candidates);

enum class ErrorPolicy { SkipDocument, FailQuery };

struct WitnessPolicy {
    double confidence_threshold = 0.5;
    std::size_t min_witnesses = 1;
    /// Witnesses kept in reports; 0 keeps all.
    std::size_t max_reported = 3;
    ErrorPolicy error_policy = ErrorPolicy::SkipDocument;
    /// Stop assessing once min_witnesses is reached.
    bool early_stop = true;
    /// Documents assessed concurrently; results are combined in document order.
    std::size_t parallelism = 1;
};

struct Witness {
    DocId doc_id;
    double rank_score = 0.0;
    AssessmentResult result;
    bool operator==(const Witness&) const = default;
};

struct WitnessVerdict {
    DocId doc_id;
    bool is_witness = false;
    double rank_score = 0.0;
};

/// Witness rule: confident answer, canonicalized, and naming the required
/// participant when one is given. Without a required participant any
/// confident answer counts.
bool is_witness(const AssessmentResult& result, const std::optional<EntityId>& required, const WitnessPolicy& policy);

using AssessFn = std::function<AssessmentResult(const AssessmentRequest&)>;
using ScoreFn = std::function<double(const Document&, const AssessmentResult&)>;

/// rank_score = confidence
double confidence_score(const Document&, const AssessmentResult& result);

struct WitnessOutcome {
    bool holds = false;
    std::size_t witness_count = 0;
    std::vector<Witness> witnesses;  // ranked: score desc, doc_id asc; truncated to max_reported
    std::size_t documents_assessed = 0;
    std::size_t documents_skipped = 0;  // assessor errors under SkipDocument
};

/// `request` is a template; its document pointer is set per document.
WitnessOutcome evaluate_witnesses(std::span<const Document* const> documents, const AssessmentRequest& request,
                                  const WitnessPolicy& policy, const AssessFn& assess,
                                  const ScoreFn& score = confidence_score);

}  // namespace narratekg
