#include "overgen/annotation/synthetic.hpp"

#include "overgen/random.hpp"

namespace overgen::annotation {

std::size_t simulate_acceptability(Study& study, std::span<const SyntheticAnnotator> annotators, const PlantedRule& rule,
                                   std::uint64_t seed, Clock::time_point now) {
    if (study.spec().kind != StudyKind::acceptability) throw PreconditionError("simulation needs an acceptability study");
    std::size_t recorded = 0;
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& annotator : annotators) {
            auto page = study.claim(annotator.id, now);
            if (!page) continue;
            progress = true;
            for (const auto& subject : page->subject_ids) {
                Rng rng = Rng::derive(seed, annotator.id + '\x1f' + subject);
                bool answer = rule(study.item(subject));
                if (annotator.adversarial) answer = !answer;
                else if (rng.bernoulli(annotator.error_rate)) answer = !answer;
                study.record(annotator.id, subject, AcceptabilityPayload{answer}, annotator.ms_per_page, now);
                ++recorded;
            }
        }
    }
    return recorded;
}

}  // namespace overgen::annotation
