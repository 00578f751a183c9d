#include "dcoh/linearizer.hpp"

#include <sstream>
#include <stdexcept>

#include "dcoh/common.hpp"

namespace dcoh {

void Channels::check() const {
  if (!word && !role && !da)
    throw std::invalid_argument("channels: need at least one of word, role, da");
}

std::string Channels::to_string() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(word, "word");
  add(role, "role");
  add(da, "da");
  add(turn, "turn");
  return s;
}

Channels Channels::parse(std::string_view spec) {
  Channels c;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string_view::npos) end = spec.size();
    const auto name = spec.substr(start, end - start);
    if (name == "word") c.word = true;
    else if (name == "role") c.role = true;
    else if (name == "da") c.da = true;
    else if (name == "turn") c.turn = true;
    else if (name == "all") c.word = c.role = c.da = c.turn = true;
    else throw DataError("unknown channel '" + std::string(name) + "'");
    start = end + 1;
  }
  c.check();
  return c;
}

std::size_t TokenStream::length() const {
  if (channels.word) return word.size();
  if (channels.role) return role.size();
  if (channels.da) return da.size();
  return turn.size();
}

namespace {

class Emitter {
 public:
  Emitter(const EncodingConfig& cfg, TokenStream& out)
      : c_(cfg.channels), v_(*cfg.vocab), out_(out) {
    no_ent_word_ = v_.words.at(kNoEnt, "word vocabulary");
    unk_word_ = v_.words.at(kUnk, "word vocabulary");
    no_ent_role_ = v_.roles.at(kNoEnt, "role vocabulary");
  }

  void begin_turn(Speaker s) {
    speaker_ = speaker_char(s);
    first_in_turn_ = true;
  }

  // One position; `mention` null means <no_ent>.
  void position(const EntityMention* mention, std::int32_t da_id) {
    if (c_.word) {
      if (!mention) out_.word.push_back(no_ent_word_);
      else out_.word.push_back(v_.words.find(mention->head).value_or(unk_word_));
    }
    if (c_.role) {
      out_.role.push_back(mention ? v_.roles.at(std::string(1, role_char(mention->role)),
                                                "role")
                                  : no_ent_role_);
    }
    if (c_.da) out_.da.push_back(da_id);
    if (c_.turn) {
      const std::string tag = std::string(first_in_turn_ ? "B-" : "I-") + speaker_;
      out_.turn.push_back(v_.turns.at(tag, "turn tag"));
    }
    first_in_turn_ = false;
  }

 private:
  const Channels& c_;
  const Vocabularies& v_;
  TokenStream& out_;
  std::int32_t no_ent_word_, unk_word_, no_ent_role_;
  char speaker_ = 'A';
  bool first_in_turn_ = true;
};

}  // namespace

TokenStream linearize(std::span<const Turn> turns, const EncodingConfig& cfg) {
  cfg.channels.check();
  if (!cfg.vocab) throw std::invalid_argument("linearize: no vocabularies");
  if (turns.empty()) throw DataError("linearize: no turns");
  const auto& v = *cfg.vocab;
  TokenStream out;
  out.channels = cfg.channels;
  Emitter emit(cfg, out);

  const bool entities = cfg.channels.entities();
  const bool das = cfg.channels.da;
  for (const auto& turn : turns) {
    emit.begin_turn(turn.speaker);
    if (entities && !das) {
      bool any = false;
      for (const auto& seg : turn.segments)
        for (const auto& m : seg.entities) {
          emit.position(&m, -1);
          any = true;
        }
      if (!any) emit.position(nullptr, -1);
    } else if (!entities) {
      for (const auto& seg : turn.segments)
        emit.position(nullptr, v.das.at(seg.da, "DA tag"));
    } else {
      for (const auto& seg : turn.segments) {
        const auto b = v.das_iob.at("B-" + seg.da, "DA tag");
        const auto i = v.das_iob.at("I-" + seg.da, "DA tag");
        if (seg.entities.empty()) {
          emit.position(nullptr, b);
          continue;
        }
        for (std::size_t e = 0; e < seg.entities.size(); ++e)
          emit.position(&seg.entities[e], e == 0 ? b : i);
      }
    }
  }
  return out;
}

TokenStream encode_pairwise_inputs(std::span<const Turn> context,
                                   const Turn& candidate, const EncodingConfig& cfg) {
  if (context.empty()) throw DataError("encode_pairwise_inputs: empty context");
  std::vector<Turn> all(context.begin(), context.end());
  all.push_back(candidate);
  return linearize(all, cfg);
}

std::string stream_tsv(const TokenStream& s, const Vocabularies& v) {
  std::ostringstream out;
  out << "word\trole\tda\tturn\n";
  const auto& da_vocab = s.channels.entities() ? v.das_iob : v.das;
  for (std::size_t i = 0; i < s.length(); ++i) {
    out << (s.channels.word ? v.words.token(static_cast<std::size_t>(s.word[i])) : ".")
        << '\t'
        << (s.channels.role ? v.roles.token(static_cast<std::size_t>(s.role[i])) : ".")
        << '\t'
        << (s.channels.da ? da_vocab.token(static_cast<std::size_t>(s.da[i])) : ".")
        << '\t'
        << (s.channels.turn ? v.turns.token(static_cast<std::size_t>(s.turn[i])) : ".")
        << '\n';
  }
  return out.str();
}

}  // namespace dcoh
