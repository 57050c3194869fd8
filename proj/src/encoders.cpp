#include "unicast/encoders.hpp"

#include <fstream>
#include <sstream>

namespace unicast {

Tensor patchify_image(const RasterImage& img, int patch_size) {
    if (patch_size < 1) throw config_error("patchify_image: patch size must be >= 1");
    if (img.width % patch_size != 0 || img.height % patch_size != 0) {
        throw dimension_error("patchify_image: " + std::to_string(img.width) + "x" +
                              std::to_string(img.height) + " image not divisible by patch size " +
                              std::to_string(patch_size));
    }
    const int gx = img.width / patch_size;
    const int gy = img.height / patch_size;
    const int per_patch = patch_size * patch_size;
    std::vector<double> data(static_cast<size_t>(gx) * gy * per_patch);
    for (int py = 0; py < gy; ++py) {
        for (int px = 0; px < gx; ++px) {
            double* row = data.data() + (static_cast<size_t>(py) * gx + px) * per_patch;
            for (int y = 0; y < patch_size; ++y) {
                for (int x = 0; x < patch_size; ++x) {
                    row[y * patch_size + x] =
                        img.at(py * patch_size + y, px * patch_size + x);
                }
            }
        }
    }
    return Tensor::from_data({gx * gy, per_patch}, std::move(data));
}

Tensor vision_forward(const RasterImage& img, const VisionEncoder& enc) {
    return vision_forward_patches(patchify_image(img, enc.patch_size), enc);
}

Tensor vision_forward_patches(const Tensor& patches, const VisionEncoder& enc) {
    Tensor embedded = add(matmul(patches, enc.patch_w), enc.patch_b);
    Tensor with_pos = add(embedded, sinusoidal_encoding(embedded.rows(), embedded.cols()));
    return stack_forward(with_pos, enc.stack, enc.weights, enc.prompts);
}

std::vector<int> tokenize(const std::string& text, int max_text_len) {
    if (text.empty()) throw input_error("tokenize: empty text");
    if (max_text_len < 1) throw config_error("tokenize: max_text_len must be >= 1");
    std::vector<int> ids;
    ids.reserve(static_cast<size_t>(max_text_len));
    for (size_t i = 0; i < text.size() && static_cast<int>(ids.size()) < max_text_len; ++i) {
        ids.push_back(static_cast<unsigned char>(text[i]));
    }
    while (static_cast<int>(ids.size()) < max_text_len) ids.push_back(TextEncoder::kPadId);
    return ids;
}

Tensor text_forward(const std::vector<int>& ids, const TextEncoder& enc) {
    Tensor embedded = embedding_rows(enc.token_embed, ids);
    Tensor with_pos = add(embedded, sinusoidal_encoding(embedded.rows(), embedded.cols()));
    if (enc.stack.num_layers == 0) {
        if (enc.prompts.prompt_length != 0) {
            throw config_error("text_forward: prompts configured for a zero-layer stack");
        }
        return with_pos;
    }
    return stack_forward(with_pos, enc.stack, enc.weights, enc.prompts);
}

std::map<std::string, std::string> load_descriptions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("load_descriptions: cannot open " + path);
    std::map<std::string, std::string> table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const size_t colon = line.find(':');
        if (colon == std::string::npos) {
            throw input_error("load_descriptions: line " + std::to_string(lineno) +
                              " has no 'name: text' separator");
        }
        std::string name = line.substr(0, colon);
        std::string text = line.substr(colon + 1);
        const auto trim = [](std::string& s) {
            const size_t a = s.find_first_not_of(" \t\r");
            const size_t b = s.find_last_not_of(" \t\r");
            s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
        };
        trim(name);
        trim(text);
        if (name.empty() || text.empty()) {
            throw input_error("load_descriptions: line " + std::to_string(lineno) +
                              " has an empty name or description");
        }
        table[name] = text;
    }
    return table;
}

DatasetDescription description_for(const std::map<std::string, std::string>& table,
                                   const std::string& dataset) {
    auto it = table.find(dataset);
    if (it == table.end()) {
        std::ostringstream known;
        for (const auto& [name, _] : table) known << ' ' << name;
        throw input_error("description_for: no entry for '" + dataset + "'; known:" + known.str());
    }
    return DatasetDescription{it->second};
}

} // namespace unicast
