#pragma once

#include <map>
#include <string>
#include <vector>

#include "unicast/chart.hpp"
#include "unicast/transformer.hpp"

namespace unicast {

// Frozen patch-embedding vision stack with trainable per-layer prompts.
struct VisionEncoder {
    int patch_size = 8;
    Tensor patch_w; // patch_size^2 x d_v, frozen
    Tensor patch_b; // d_v, frozen
    StackConfig stack;
    std::vector<LayerWeights> weights;
    PromptSet prompts;
};

// Byte-level text stack. Vocabulary is all 256 byte values plus one pad id,
// so no external vocabulary asset is needed.
struct TextEncoder {
    static constexpr int kPadId = 256;
    static constexpr int kVocabSize = 257;

    Tensor token_embed; // kVocabSize x d_t, frozen
    int max_text_len = 32;
    StackConfig stack;
    std::vector<LayerWeights> weights;
    PromptSet prompts;
};

struct DatasetDescription {
    std::string text; // nonempty
};

// Cuts the image into non-overlapping patch_size x patch_size tiles in
// row-major grid order; each tile is flattened row-major into one row.
Tensor patchify_image(const RasterImage& img, int patch_size);

// patchify -> frozen linear embed -> positional encoding -> prompted stack.
// Output keeps the prompt rows: (l_v + num_patches) x d_v.
Tensor vision_forward(const RasterImage& img, const VisionEncoder& enc);

// Same path starting from already patchified rows, so callers can cache the
// rasterization work across epochs.
Tensor vision_forward_patches(const Tensor& patches, const VisionEncoder& enc);

// UTF-8 bytes as ids 0..255, truncated or padded with kPadId to max_text_len.
std::vector<int> tokenize(const std::string& text, int max_text_len);

// embed -> positional encoding -> prompted stack: (l_t + max_text_len) x d_t.
Tensor text_forward(const std::vector<int>& ids, const TextEncoder& enc);

// Plain-text table "name: description", one entry per line, '#' comments.
std::map<std::string, std::string> load_descriptions(const std::string& path);

// Lookup with a helpful error listing the known dataset names.
DatasetDescription description_for(const std::map<std::string, std::string>& table,
                                   const std::string& dataset);

} // namespace unicast
