#include "narratekg/witness.hpp"

#include "narratekg/text.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <future>
#include <thread>

namespace narratekg {

std::string instantiate_template(std::string_view question_template, std::string_view event_label) {
    const auto first = question_template.find(kEventMask);
    if (first == std::string_view::npos ||
        question_template.find(kEventMask, first + kEventMask.size()) != std::string_view::npos) {
        throw SchemaError("question template '" + std::string(question_template) +
                          "' must contain exactly one " + std::string(kEventMask));
    }
    std::string out(question_template.substr(0, first));
    out += event_label;
    out += question_template.substr(first + kEventMask.size());
    return out;
}

Canonicalization canonicalize(std::string_view phrase, std::span<const Candidate> candidates, double threshold) {
    Canonicalization best;
    if (phrase.empty()) return best;
    const Candidate* winner = nullptr;
    for (const auto& c : candidates) {
        for (const auto& alias : c.aliases) {
            const double s = text::trigram_cosine(phrase, alias);
            if (!winner || s > best.similarity) {
                best.similarity = s;
                winner = &c;
            }
        }
    }
    if (winner && best.similarity >= threshold) best.target = winner->id;
    return best;
}

BaselineConfig BaselineConfig::defaults() {
    BaselineConfig c;
    c.lexicon = {
        {"is_aggressor",
         {"launched an offensive", "launched an invasion", "launched an attack", "invaded", "attacked",
          "was an aggressor", "is an aggressor", "was the aggressor", "is the aggressor", "act of aggression"}},
        {"is_threat", {"is a threat", "was a threat", "poses a threat", "posed a threat", "threatens", "threatened"}},
        {"is_enemy", {"is an enemy", "was an enemy", "is the enemy", "was the enemy", "enemy of", "hostile power"}},
        {"is_war_criminal", {"committed war crimes", "war criminal", "war criminals", "committed atrocities"}},
    };
    c.negation_cues = {"not",    "no",      "never",   "denied", "denies", "deny",    "claims",
                       "claimed", "falsely", "rejected", "without", "nor",    "refuted", "dismissed"};
    return c;
}

BaselineAssessor::BaselineAssessor(BaselineConfig config) : config_(std::move(config)) {
    for (const auto& [attribution, phrases] : config_.lexicon) {
        auto& out = signals_[attribution];
        for (const auto& p : phrases) {
            auto toks = text::phrase_tokens(p);
            if (!toks.empty()) out.push_back(std::move(toks));
        }
    }
    for (const auto& cue : config_.negation_cues) {
        auto toks = text::phrase_tokens(cue);
        if (!toks.empty()) negations_.push_back(std::move(toks));
    }
}

namespace {

struct Span {
    std::size_t start;
    std::size_t end;  // exclusive
};

bool matches_at(const std::vector<text::Token>& toks, std::size_t at, const std::vector<std::string>& phrase) {
    if (at + phrase.size() > toks.size()) return false;
    for (std::size_t i = 0; i < phrase.size(); ++i) {
        if (toks[at + i].lower != phrase[i]) return false;
    }
    return true;
}

std::string join_text(const std::vector<text::Token>& toks, Span s) {
    std::string out;
    for (std::size_t i = s.start; i < s.end; ++i) {
        if (i > s.start) out += ' ';
        out += toks[i].text;
    }
    return out;
}

}  // namespace

AssessmentResult BaselineAssessor::assess(const AssessmentRequest& request) const {
    AssessmentResult none;
    auto sig = signals_.find(request.attribution);
    if (sig == signals_.end() || !request.document) return none;

    const auto toks = text::tokenize(request.document->context());
    std::vector<std::size_t> sentence(toks.size());
    for (std::size_t i = 0, s = 0; i < toks.size(); ++i) {
        sentence[i] = s;
        if (toks[i].sentence_end) ++s;
    }

    std::vector<Span> mentions;
    for (const auto& cand : request.candidates) {
        for (const auto& alias : cand.aliases) {
            const auto phrase = text::phrase_tokens(alias);
            if (phrase.empty()) continue;
            for (std::size_t i = 0; i + phrase.size() <= toks.size(); ++i) {
                if (matches_at(toks, i, phrase)) mentions.push_back({i, i + phrase.size()});
            }
        }
    }

    bool found = false;
    double best_conf = 0.0;
    std::string best_answer;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        for (const auto& phrase : sig->second) {
            if (!matches_at(toks, i, phrase)) continue;
            const Span hit{i, i + phrase.size()};

            const std::size_t window_start = hit.start > config_.negation_window ? hit.start - config_.negation_window : 0;
            bool negated = false;
            for (std::size_t w = window_start; w < hit.start && !negated; ++w) {
                for (const auto& cue : negations_) {
                    if (w + cue.size() <= hit.start && matches_at(toks, w, cue)) {
                        negated = true;
                        break;
                    }
                }
            }
            if (negated) continue;

            // Nearest alias mention in the same sentence, preferring the agent position before the signal.
            const Span* before = nullptr;
            const Span* after = nullptr;
            for (const auto& m : mentions) {
                if (sentence[m.start] != sentence[hit.start]) continue;
                if (m.end <= hit.start) {
                    if (!before || m.end > before->end || (m.end == before->end && m.start < before->start)) before = &m;
                } else if (m.start >= hit.end) {
                    if (!after || m.start < after->start || (m.start == after->start && m.end > after->end)) after = &m;
                }
            }
            std::string answer;
            std::size_t gap = 0;
            if (before) {
                answer = join_text(toks, *before);
                gap = hit.start - before->end;
            } else if (after) {
                answer = join_text(toks, *after);
                gap = after->start - hit.end;
            } else {
                std::size_t j = hit.start;
                while (j > 0 && sentence[j - 1] == sentence[hit.start] &&
                       std::isupper(static_cast<unsigned char>(toks[j - 1].text[0]))) {
                    --j;
                }
                if (j == hit.start) continue;
                answer = join_text(toks, {j, hit.start});
            }
            const double conf = 0.95 * std::pow(0.9, static_cast<double>(gap));
            if (!found || conf > best_conf) {
                found = true;
                best_conf = conf;
                best_answer = std::move(answer);
            }
        }
    }
    if (!found) return none;

    AssessmentResult out;
    out.answer_phrase = std::move(best_answer);
    out.confidence = best_conf;
    auto canon = canonicalize(out.answer_phrase, request.candidates, config_.canonicalization_threshold);
    out.canonical_target = canon.target;
    out.similarity = canon.similarity;
    return out;
}

std::string encode_assess_request(const AssessmentRequest& request) {
    nlohmann::ordered_json j;
    j["question"] = request.question;
    j["context"] = request.document ? request.document->context() : std::string();
    auto cands = nlohmann::ordered_json::array();
    for (const auto& c : request.candidates) cands.push_back({{"id", c.id}, {"aliases", c.aliases}});
    j["candidates"] = std::move(cands);
    return j.dump();
}

AssessmentResult decode_assess_response(std::string_view body, std::span<const Candidate> candidates) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedResponseError(std::string("assessor response is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw MalformedResponseError("assessor response must be a JSON object");
    auto field = [&](const char* key) -> const nlohmann::json& {
        auto it = j.find(key);
        if (it == j.end()) throw MalformedResponseError(std::string("assessor response lacks '") + key + "'");
        return *it;
    };
    AssessmentResult r;
    const auto& answer = field("answer");
    const auto& confidence = field("confidence");
    const auto& target = field("canonical_target");
    const auto& similarity = field("similarity");
    if (!answer.is_string()) throw MalformedResponseError("'answer' must be a string");
    if (!confidence.is_number()) throw MalformedResponseError("'confidence' must be a number");
    if (!similarity.is_number()) throw MalformedResponseError("'similarity' must be a number");
    r.answer_phrase = answer.get<std::string>();
    r.confidence = confidence.get<double>();
    r.similarity = similarity.get<double>();
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) throw MalformedResponseError("'confidence' outside [0, 1]");
    if (!(r.similarity >= -1.0 && r.similarity <= 1.0)) throw MalformedResponseError("'similarity' outside [-1, 1]");
    if (target.is_string()) {
        auto id = target.get<std::string>();
        if (std::none_of(candidates.begin(), candidates.end(), [&](const Candidate& c) { return c.id == id; })) {
            throw MalformedResponseError("'canonical_target' " + id + " is not one of the request candidates");
        }
        r.canonical_target = std::move(id);
    } else if (!target.is_null()) {
        throw MalformedResponseError("'canonical_target' must be a string or null");
    }
    return r;
}

RemoteAssessor::RemoteAssessor(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

AssessmentResult RemoteAssessor::assess(const AssessmentRequest& request) const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post("/assess", encode_assess_request(request), "application/json");
    if (!res) {
        const auto err = res.error();
        const std::string what = "assessor at " + base_url_ + ": " + httplib::to_string(err);
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read || err == httplib::Error::Write) {
            throw AssessorTimeoutError(what);
        }
        throw AssessorConnectionError(what);
    }
    if (res->status != 200) {
        throw MalformedResponseError("assessor at " + base_url_ + " answered HTTP " + std::to_string(res->status));
    }
    return decode_assess_response(res->body, request.candidates);
}

bool RemoteAssessor::healthy() const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Get("/healthz");
    return res && res->status == 200;
}

AssessmentResult DelayedAssessor::assess(const AssessmentRequest& request) const {
    std::this_thread::sleep_for(delay_);
    return inner_.assess(request);
}

bool is_witness(const AssessmentResult& result, const std::optional<EntityId>& required, const WitnessPolicy& policy) {
    if (result.confidence < policy.confidence_threshold) return false;
    if (!required) return true;
    return result.canonical_target && *result.canonical_target == *required;
}

double confidence_score(const Document&, const AssessmentResult& result) { return result.confidence; }

WitnessOutcome evaluate_witnesses(std::span<const Document* const> documents, const AssessmentRequest& request,
                                  const WitnessPolicy& policy, const AssessFn& assess, const ScoreFn& score) {
    WitnessOutcome out;
    std::vector<Witness> found;
    const std::size_t width = std::max<std::size_t>(1, policy.parallelism);

    struct Slot {
        std::optional<AssessmentResult> result;
        std::exception_ptr error;
    };
    auto run_one = [&](const Document* doc) {
        Slot s;
        AssessmentRequest r = request;
        r.document = doc;
        try {
            s.result = assess(r);
        } catch (const AssessorError&) {
            s.error = std::current_exception();
        }
        return s;
    };

    for (std::size_t i = 0; i < documents.size(); i += width) {
        const std::size_t end = std::min(documents.size(), i + width);
        std::vector<Slot> slots;
        if (width == 1) {
            slots.push_back(run_one(documents[i]));
        } else {
            std::vector<std::future<Slot>> pending;
            for (std::size_t d = i; d < end; ++d) pending.push_back(std::async(std::launch::async, run_one, documents[d]));
            for (auto& f : pending) slots.push_back(f.get());
        }
        for (std::size_t d = i; d < end; ++d) {
            auto& slot = slots[d - i];
            if (slot.error) {
                if (policy.error_policy == ErrorPolicy::FailQuery) std::rethrow_exception(slot.error);
                ++out.documents_skipped;
                continue;
            }
            ++out.documents_assessed;
            if (is_witness(*slot.result, request.required_participant, policy)) {
                ++out.witness_count;
                found.push_back({documents[d]->doc_id, score(*documents[d], *slot.result), std::move(*slot.result)});
            }
        }
        if (policy.early_stop && out.witness_count >= policy.min_witnesses) break;
    }
    out.holds = out.witness_count >= policy.min_witnesses;
    std::sort(found.begin(), found.end(), [](const Witness& a, const Witness& b) {
        if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
        return a.doc_id < b.doc_id;
    });
    if (policy.max_reported > 0 && found.size() > policy.max_reported) found.resize(policy.max_reported);
    out.witnesses = std::move(found);
    return out;
}

}  // namespace narratekg
