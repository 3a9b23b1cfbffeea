//! Built-in German word pools for the synthetic corpus.

/// Consecutive concept groups form topics of this many groups.
pub const TOPIC_SIZE: usize = 5;

/// Science concept groups. Words inside a group express the same rubric concept.
pub const CONCEPT_GROUPS: &[&[&str]] = &[
    &["wärme", "hitze", "wärmeenergie"],
    &["temperatur", "erwärmung", "abkühlung"],
    &["energie", "energieform", "energieumwandlung"],
    &["strom", "spannung", "stromkreis"],
    &["magnet", "magnetfeld", "anziehung"],
    &["kraft", "gewichtskraft", "reibung"],
    &["masse", "dichte", "volumen"],
    &["druck", "luftdruck", "überdruck"],
    &["licht", "lichtstrahl", "reflexion"],
    &["schall", "schwingung", "frequenz"],
    &["atom", "molekül", "teilchen"],
    &["reaktion", "oxidation", "verbrennung"],
    &["sauerstoff", "kohlendioxid", "stickstoff"],
    &["wasser", "wasserdampf", "verdunstung"],
    &["säure", "lauge", "neutralisation"],
    &["zelle", "zellkern", "zellwand"],
    &["photosynthese", "chlorophyll", "blattgrün"],
    &["atmung", "lunge", "kreislauf"],
    &["gen", "erbgut", "vererbung"],
    &["evolution", "anpassung", "selektion"],
    &["bakterien", "viren", "erreger"],
    &["ökosystem", "nahrungskette", "population"],
    &["klima", "treibhauseffekt", "erderwärmung"],
    &["gestein", "erosion", "sediment"],
    &["planet", "umlaufbahn", "schwerkraft"],
    &["geschwindigkeit", "beschleunigung", "bewegung"],
    &["lösung", "konzentration", "löslichkeit"],
    &["isolierung", "dämmung", "wärmeleitung"],
    &["verdauung", "enzym", "nährstoffe"],
    &["radioaktivität", "strahlung", "zerfall"],
];

/// Function words and everyday vocabulary shared by all corpora.
pub const FILLER: &[&str] = &[
    "die", "der", "das", "und", "ist", "weil", "es", "sich", "wird", "wenn", "dann", "auch",
    "nicht", "mehr", "ein", "eine", "einen", "dem", "den", "im", "in", "auf", "mit", "von",
    "zu", "bei", "durch", "für", "als", "wie", "so", "sehr", "viel", "wenig", "immer", "oft",
    "kann", "können", "muss", "sind", "war", "wurde", "werden", "man", "wir", "ich", "sie",
    "er", "haben", "hat", "noch", "schon", "nur", "aber", "oder", "also", "deshalb", "dadurch",
    "dabei", "dort", "hier", "da", "nach", "vor", "über", "unter", "ohne", "gegen", "um",
    "bis", "größer", "kleiner", "gleich", "anders", "schnell", "langsam", "stark", "schwach",
    "hoch", "niedrig", "gut", "schlecht", "richtig", "wichtig", "einfach", "genau",
    "vielleicht", "denke", "glaube", "meine", "finde", "zeigt", "sieht", "macht", "gibt",
    "kommt", "geht", "bleibt", "steigt", "sinkt", "passiert", "entsteht", "verändert",
];

/// Content words for the concept-free generic corpus.
pub const GENERIC: &[&str] = &[
    "haus", "stadt", "schule", "freund", "freundin", "auto", "zeit", "tag", "leute", "familie",
    "garten", "straße", "bahnhof", "urlaub", "ferien", "buch", "film", "musik", "spiel",
    "fußball", "essen", "küche", "zimmer", "fenster", "tür", "hund", "katze", "wetter",
    "regen", "sonne", "morgen", "abend", "woche", "jahr", "geld", "laden", "markt", "bus",
    "fahrrad", "telefon", "computer", "lehrer", "klasse", "pause", "geburtstag", "party",
    "reise", "berg", "meer", "strand", "wald", "dorf", "nachbar", "onkel", "tante", "oma",
    "opa", "brief", "bild", "farbe",
];

/// Words used to build domain task prompts.
pub const TASK_VERBS: &[&str] = &["erkläre", "beschreibe", "begründe", "vergleiche"];
pub const TASK_NOUNS: &[&str] = &[
    "experiment", "versuch", "beobachtung", "messung", "diagramm", "tabelle", "ergebnis",
    "daten", "probe", "modell",
];
pub const TASK_LINKS: &[&str] = &["warum", "wie", "was", "welche"];

/// Words used to build generic task prompts.
pub const GENERIC_TASK_VERBS: &[&str] = &["erzähle", "schreibe", "berichte"];
pub const GENERIC_TASK_LINKS: &[&str] = &["von", "über"];
pub const TASK_EXTRA: &[&str] = &["deine", "deiner", "antwort", "aufgabe"];
