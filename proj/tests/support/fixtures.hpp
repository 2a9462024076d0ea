#pragma once

#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "caloraify/retrieval.hpp"
#include "caloraify/vlm_pipeline.hpp"

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(CALORAIFY_FIXTURE_DIR) + "/" + name; }

inline std::vector<std::uint8_t> read_bytes(const std::string& name) {
    std::ifstream in(path(name), std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture " + name);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline caloraify::vlm::Image png(const std::string& name) { return {read_bytes(name), "image/png"}; }

struct Stack {
    caloraify::kb::KnowledgeBase kb = caloraify::kb::ingest_csv_file(path("kb_fixture.csv"));
    std::unique_ptr<caloraify::retrieval::VectorIndex> index =
        caloraify::retrieval::build_index(kb, std::make_shared<caloraify::retrieval::HashingEmbedder>());
    caloraify::vlm::StubBackend backend = caloraify::vlm::StubBackend::from_fixture_file(path("stub_fixture.jsonl"));
    caloraify::vlm::PipelineConfig config;
};

}  // namespace fixtures
