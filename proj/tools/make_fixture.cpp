// Generates the bundled reference model: a word-piece vocabulary mined from
// the prompt templates and environment fixtures, and seeded random weights
// with one planted prior (the "Search" token is favoured at every position).
//
//   make_fixture --source <repo> --out <dir> [--seed N]

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <regex>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tta/errors.hpp"
#include "tta/lm/model.hpp"
#include "tta/util.hpp"

namespace {

using namespace tta;

// Pieces every toy-environment action needs intact, plus the steering pair.
const std::vector<std::string> kForced = {
    "<|system|>", "<|user|>", "<|assistant|>", "```", "click", " [", "]\n", "Go", "Search", "type", "stop",
    "scroll",     "hover",    "press",         "goto", "go_back", "ls", "cd", "cat", "wc", "rm", "mkdir",
    "touch",      "echo",     "pwd",           "file_name", "folder", "content", "mode", "(", ")", "=\"",
};

std::string corpus(const std::filesystem::path& source) {
  std::string text;
  for (const auto& entry : std::filesystem::directory_iterator(source / "prompts")) {
    if (entry.path().extension() == ".txt") text += read_file(entry.path()) + "\n";
  }
  for (const char* f : {"data/envs/web_travel.json", "data/envs/fs.json"}) {
    const auto j = nlohmann::json::parse(read_file(source / f));
    // Only string leaves; JSON punctuation would crowd out real pieces.
    std::vector<const nlohmann::json*> stack{&j};
    while (!stack.empty()) {
      const auto* node = stack.back();
      stack.pop_back();
      if (node->is_string()) text += node->get<std::string>() + "\n";
      if (node->is_structured()) {
        for (const auto& child : *node) stack.push_back(&child);
      }
      if (node->is_object()) {
        for (const auto& item : node->items()) text += item.key() + "\n";
      }
    }
  }
  return text;
}

std::vector<std::string> build_vocabulary(const std::string& text, std::size_t size) {
  std::vector<std::string> tokens{"<unk>", "<bos>", "<eos>"};
  for (char c = 0x20; c < 0x7f; ++c) tokens.emplace_back(1, c);
  tokens.emplace_back("\n");
  tokens.emplace_back("\t");
  std::set<std::string> have(tokens.begin(), tokens.end());
  for (const auto& f : kForced) {
    if (have.insert(f).second) tokens.push_back(f);
  }

  static const std::regex kPiece(R"( ?[A-Za-z]+|[0-9]+|[^\sA-Za-z0-9]{2,3})");
  std::map<std::string, long> counts;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kPiece); it != std::sregex_iterator(); ++it) {
    const std::string piece = it->str();
    if (piece.size() >= 2 && piece.size() <= 16) ++counts[piece];
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  // Score by characters saved; ties fall back to lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second * static_cast<long>(a.first.size() - 1) > b.second * static_cast<long>(b.first.size() - 1);
  });
  for (const auto& [piece, count] : ranked) {
    if (tokens.size() >= size) break;
    if (count < 2) continue;
    if (have.insert(piece).second) tokens.push_back(piece);
  }
  if (tokens.size() < size) throw tta::Error("corpus too small for a vocabulary of " + std::to_string(size));
  return tokens;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the reference model fixture"};
  std::filesystem::path source = ".";
  std::filesystem::path out = "data/model";
  std::uint64_t seed = 20240917;
  double prior = 4.0;
  app.add_option("--source", source, "Repository root")->check(CLI::ExistingDirectory);
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", seed, "Weight seed");
  app.add_option("--prior", prior, "Strength of the planted Search prior");
  CLI11_PARSE(app, argc, argv);

  try {
    lm::ModelConfig config;
    const lm::Vocabulary vocab(build_vocabulary(corpus(source), config.vocab_size));
    lm::ModelWeights w = lm::random_model(config, seed);

    // The final norm gets a bias along a fixed unit direction and the Search
    // row of W_LM is pulled onto that direction, so every position starts
    // with a Search logit about prior * prior / 2 above the rest.
    const double inv = 1.0 / std::sqrt(static_cast<double>(config.d));
    const auto search = static_cast<std::size_t>(*vocab.find("Search"));
    for (std::size_t k = 0; k < config.d; ++k) {
      const double dir = (k % 2 == 0 ? 1.0 : -1.0) * inv;
      w.final_norm.bias[k] += prior * dir;
      w.output_projection(search, k) += 0.5 * prior * dir;
    }
    lm::validate(w);

    std::filesystem::create_directories(out);
    lm::save_model(w, out / "tiny.ttaw");
    vocab.save(out / "tiny.vocab");
    std::cout << "wrote " << (out / "tiny.ttaw").string() << " and " << (out / "tiny.vocab").string() << " (d=" << config.d
              << " layers=" << config.layers << " vocab=" << vocab.size() << " seed=" << seed << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
