#include "intentsynth/promptgen.hpp"

namespace intentsynth {

namespace {

PromptTemplate make(IntentLabel label, const char *variant, const char *body) {
  PromptTemplate t;
  t.label = label;
  t.variant_id = variant;
  t.body = body;
  return t;
}

std::vector<PromptTemplate> build_catalog() {
  std::vector<PromptTemplate> c;
  c.push_back(make(
      IntentLabel::help, "help/full",
      "Generieren Sie 10 verschiedene Sprachbefehle, mit denen ein älterer Mensch seinen KI-Assistenten "
      "in gefährlichen Situationen um Hilfe bitten kann, ohne jedes Mal explizit um Hilfe zu bitten. "
      "Verwenden Sie verschiedene Sätze und unterschiedliche Gesundheitssituationen. Sie müssen vor "
      "jeder Äußerung die Anweisung 'Ältere_Person:' als Sprechername einfügen und 'NÄCHSTES' am Ende "
      "jeder Äußerung, um das Ende der Äußerung zu kennzeichnen. Geben Sie die angeforderten Sätze genau "
      "in der beschriebenen Struktur aus, geben Sie nichts anderes aus."));
  c.push_back(make(
      IntentLabel::help, "help/short",
      "Generieren Sie 10 verschiedene sehr kurze Sprachbefehle, mit denen eine ältere Person ihren "
      "KI-Assistenten in gefährlichen Situationen um Hilfe bitten kann, ohne jedes Mal explizit um Hilfe "
      "zu bitten. Verwenden Sie verschiedene, kurze Sätze, die aus ein bis zwei Wörtern bestehen und "
      "verschiedene Gesundheitssituationen beschreiben. Fügen Sie vor jeder Äußerung die Anweisung "
      "'Ältere_Person:' als Sprechername ein und am Ende jeder Äußerung 'NÄCHSTES', um das Ende der "
      "Äußerung zu markieren. Geben Sie die geforderten Sätze genau in der beschriebenen Struktur aus, "
      "geben Sie nichts anderes aus."));
  c.push_back(make(
      IntentLabel::light_on, "light_on/std",
      "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren KI-Assistenten "
      "bittet, das Licht einzuschalten. Verwenden Sie verschiedene Sätze und unterschiedliche Ausdrücke. "
      "Sie müssen vor jeder Äußerung die Anweisung 'Ältere_Person:' als Sprechername einfügen und "
      "'NÄCHSTES' am Ende jeder Äußerung, um das Ende der Äußerung zu kennzeichnen. Geben Sie die "
      "angeforderten Sätze genau in der beschriebenen Struktur aus, geben Sie nichts anderes aus."));
  c.push_back(make(
      IntentLabel::light_off, "light_off/std",
      "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren KI-Assistenten "
      "bittet, das Licht auszuschalten. Verwenden Sie verschiedene Sätze und unterschiedliche Ausdrücke. "
      "Sie müssen vor jeder Äußerung die Anweisung 'Ältere_Person:' als Sprechername einfügen und "
      "'NÄCHSTES' am Ende jeder Äußerung, um das Ende der Äußerung zu kennzeichnen. Geben Sie die "
      "angeforderten Sätze genau in der beschriebenen Struktur aus, geben Sie nichts anderes aus."));
  // The published roll_up prompt uses typographic quotes around the keywords.
  c.push_back(make(
      IntentLabel::roll_up, "roll_up/std",
      "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren KI-Assistenten "
      "bittet, die Rollläden hochzufahren. Verwenden Sie verschiedene Sätze und unterschiedliche "
      "Ausdrücke. Sie müssen vor jeder Äußerung die Anweisung ‘Ältere_Person:‘ als Sprechername einfügen "
      "und ‘NÄCHSTES‘ am Ende jeder Äußerung, um das Ende der Äußerung zu kennzeichnen. Geben Sie die "
      "angeforderten Sätze genau in der beschriebenen Struktur aus, geben Sie nichts anderes aus."));
  c.push_back(make(
      IntentLabel::roll_down, "roll_down/std",
      "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren KI-Assistenten "
      "bittet, die Rollläden herunterzufahren. Verwenden Sie verschiedene Sätze und unterschiedliche "
      "Ausdrücke. Sie müssen vor jeder Äußerung die Anweisung 'Ältere_Person:' als Sprechername einfügen "
      "und 'NÄCHSTES' am Ende jeder Äußerung, um das Ende der Äußerung zu kennzeichnen. Geben Sie die "
      "angeforderten Sätze genau in der beschriebenen Struktur aus, geben Sie nichts anderes aus."));
  c.push_back(make(
      IntentLabel::no_command, "no_command/help_fp",
      "Generieren Sie 10 Sätze von einer älteren Person, die von einer Spracherkennung fälschlicherweise "
      "als 'Bitte um Hilfe' klassifiziert werden können, aber in Wirklichkeit als 'kein Befehl' für einen "
      "KI-Assistenten verwendet werden. Der Assistent benutzt dafür eine Keyword Detection. Verwenden Sie "
      "verschiedene Sätze und verschiedene Ausdrücke. Sie müssen vor jeder Äußerung als Sprechernamen die "
      "Anweisung 'Ältere_Person:' und am Ende jeder Äußerung 'NÄCHSTES' einfügen, um das Ende der "
      "Äußerung anzuzeigen. Ein paar Beispiele: Ältere_Person: Kannst du mir bitte helfen, mein Handy zu "
      "finden? NÄCHSTES Ältere_Person: Mein Sohn hat mir gestern mit dem Garten geholfen. NÄCHSTES "
      "Ältere_Person: Manchmal muss ich um Hilfe bitten. NÄCHSTES Ältere_Person: Diese neuen Geräte sind "
      "ohne Hilfe gar nicht zu bedienen. NÄCHSTES Ältere_Person: Früher konnte ich alles alleine, ohne um "
      "Hilfe zu bitten. NÄCHSTES"));
  c.push_back(make(
      IntentLabel::no_command, "no_command/roll_fp",
      "Generieren Sie 10 Sätze von einer älteren Person, die von einer Spracherkennung fälschlicherweise "
      "als 'Rollläden hoch- oder runterfahren' klassifiziert werden können, aber in Wirklichkeit als "
      "'kein Befehl' für einen KI-Assistenten verwendet werden. Der Assistent benutzt dafür eine Keyword "
      "Detection. Verwenden Sie verschiedene Sätze und verschiedene Ausdrücke. Sie müssen vor jeder "
      "Äußerung als Sprechernamen die Anweisung 'Ältere_Person:' und am Ende jeder Äußerung 'NÄCHSTES' "
      "einfügen, um das Ende der Äußerung anzuzeigen. Ein paar Beispiele: Ältere_Person: Mein Assistent "
      "fährt die Rollläden jeden Abend pünktlich um 18:00 herunter. NÄCHSTES Ältere_Person: Im Sommer "
      "habe ich die Jalousien gerne den ganzen Tag unten. NÄCHSTES Ältere_Person: Es ist sehr praktisch, "
      "dass mein Sprachassistent die Rollläden steuern kann. NÄCHSTES Ältere_Person: Meine Rollläden "
      "sind beim letzten Sturm kaputtgegangen. NÄCHSTES Ältere_Person: Sobald meine Jalousien oben sind, "
      "kann ich meinen Tag beginnen. NÄCHSTES"));
  c.push_back(make(
      IntentLabel::no_command, "no_command/light_fp",
      "Generieren Sie 10 Sätze von einer älteren Person, die von einer Spracherkennung fälschlicherweise "
      "als 'Licht ein- oder ausschalten' klassifiziert werden können, aber in Wirklichkeit als 'kein "
      "Befehl' für einen KI-Assistenten verwendet werden. Der Assistent benutzt dafür eine Keyword "
      "Detection. Verwenden Sie verschiedene Sätze und verschiedene Ausdrücke. Sie müssen vor jeder "
      "Äußerung als Sprechernamen die Anweisung 'Ältere_Person:' und am Ende jeder Äußerung 'NÄCHSTES' "
      "einfügen, um das Ende der Äußerung anzuzeigen. Ein paar Beispiele: Ältere_Person: Mein Assistent "
      "schaltet mir jeden morgen die Lichter an. NÄCHSTES Ältere_Person: Gestern hatten wir schon sehr "
      "früh kein Licht mehr im Raum. NÄCHSTES Ältere_Person: Die Tatsache, dass mein Sprachassistent das "
      "Licht an- und ausschalten kann ist sehr praktisch. NÄCHSTES Ältere_Person: Da ist mir ein Licht "
      "aufgegangen. NÄCHSTES Ältere_Person: Manchmal ist es hier ziemlich dunkel ohne Licht. NÄCHSTES"));
  return c;
}

} // namespace

const std::vector<PromptTemplate> &catalog() {
  static const std::vector<PromptTemplate> instance = build_catalog();
  return instance;
}

std::vector<PromptTemplate> variants_for(IntentLabel label) {
  std::vector<PromptTemplate> out;
  for (const auto &t : catalog()) {
    if (t.label == label)
      out.push_back(t);
  }
  return out;
}

} // namespace intentsynth
