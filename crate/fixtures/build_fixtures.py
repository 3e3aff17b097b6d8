#!/usr/bin/env python3
"""Regenerates the bundled fixtures: SQLite databases, the annotated case
file, the scripted LLM responses and the scripted SQL generator.

Run from the repository root: python3 fixtures/build_fixtures.py
"""

import json
import os
import sqlite3

ROOT = os.path.dirname(os.path.abspath(__file__))
DB_DIR = os.path.join(ROOT, "databases")
SCRIPT_DIR = os.path.join(ROOT, "scripts")

FORMULA_1 = """
CREATE TABLE drivers (
    driverId INTEGER PRIMARY KEY,
    forename TEXT NOT NULL,
    surname TEXT NOT NULL,
    dob TEXT,
    nationality TEXT
);
CREATE TABLE races (
    raceId INTEGER PRIMARY KEY,
    year INTEGER NOT NULL,
    name TEXT NOT NULL,
    date TEXT NOT NULL
);
CREATE TABLE results (
    resultId INTEGER PRIMARY KEY,
    raceId INTEGER NOT NULL REFERENCES races(raceId),
    driverId INTEGER NOT NULL REFERENCES drivers(driverId),
    position INTEGER,
    rank INTEGER,
    points REAL NOT NULL
);
CREATE TABLE driverStandings (
    driverStandingsId INTEGER PRIMARY KEY,
    raceId INTEGER NOT NULL REFERENCES races(raceId),
    driverId INTEGER NOT NULL REFERENCES drivers(driverId),
    points REAL NOT NULL,
    position INTEGER
);
INSERT INTO drivers VALUES
    (1, 'Michael', 'Schumacher', '1969-01-03', 'German'),
    (2, 'Sebastian', 'Vettel', '1987-07-03', 'German'),
    (3, 'Nico', 'Rosberg', '1985-06-27', 'German'),
    (4, 'Fernando', 'Alonso', '1981-07-29', 'Spanish'),
    (5, 'Lewis', 'Hamilton', '1985-01-07', 'British'),
    (6, 'Kimi', 'Raikkonen', '1979-10-17', 'Finnish'),
    (7, 'Jenson', 'Button', '1980-01-19', 'British'),
    (8, 'Nick', 'Heidfeld', '1977-05-10', 'German'),
    (9, 'Giancarlo', 'Fisichella', '1973-01-14', 'Italian'),
    (10, 'Ralf', 'Schumacher', '1975-06-30', 'German'),
    (11, 'Jarno', 'Trulli', '1974-07-13', 'Italian');
INSERT INTO races VALUES
    (1, 2006, 'Bahrain Grand Prix', '2006-03-12'),
    (2, 2006, 'Monaco Grand Prix', '2006-05-28'),
    (3, 2012, 'Brazilian Grand Prix', '2012-11-25'),
    (4, 2015, 'Abu Dhabi Grand Prix', '2015-11-29');
INSERT INTO results VALUES
    (1, 1, 4, 1, 3, 10),
    (2, 1, 1, 2, 1, 8),
    (3, 1, 6, 3, 2, 6),
    (4, 1, 7, 4, 4, 5),
    (5, 1, 10, 5, 2, 4),
    (6, 1, 9, 6, 6, 3),
    (7, 2, 4, 1, 2, 10),
    (8, 2, 1, 5, 1, 4),
    (9, 2, 9, 2, 4, 8),
    (10, 2, 8, 3, 5, 6),
    (11, 2, 11, 4, 7, 5),
    (12, 3, 7, 1, 3, 25),
    (13, 3, 4, 2, 4, 18),
    (14, 3, 3, 3, 2, 15),
    (15, 3, 2, 6, 2, 8),
    (16, 3, 1, 7, 5, 6),
    (17, 4, 3, 1, 1, 25),
    (18, 4, 5, 2, 3, 18),
    (19, 4, 2, 4, 2, 12),
    (20, 4, 6, 3, 4, 15);
INSERT INTO driverStandings VALUES
    (1, 1, 4, 10, 1),
    (2, 1, 1, 8, 2),
    (3, 2, 4, 20, 1),
    (4, 2, 1, 12, 3),
    (5, 2, 9, 11, 2),
    (6, 3, 4, 278, 2),
    (7, 3, 2, 281, 1),
    (8, 4, 5, 381, 1),
    (9, 4, 3, 322, 2);
"""

CALIFORNIA_SCHOOLS = """
CREATE TABLE schools (
    CDSCode TEXT PRIMARY KEY,
    School TEXT NOT NULL,
    City TEXT,
    County TEXT,
    OpenDate TEXT,
    Charter INTEGER
);
CREATE TABLE frpm (
    CDSCode TEXT PRIMARY KEY REFERENCES schools(CDSCode),
    Enrollment INTEGER,
    FreeMealCount INTEGER
);
INSERT INTO schools VALUES
    ('01', 'Lincoln Elementary', 'Los Angeles', 'Los Angeles', '1998-08-20', 0),
    ('02', 'Harbor Charter', 'Long Beach', 'Los Angeles', '2008-10-01', 1),
    ('03', 'Echo Park High', 'Los Angeles', 'Los Angeles', '2009-03-02', 0),
    ('04', 'Sunset Academy', 'Los Angeles', 'Los Angeles', '2010-08-16', 1),
    ('05', 'Pasadena Prep', 'Pasadena', 'Los Angeles', '2012-09-04', 1),
    ('06', 'Bay Middle', 'Oakland', 'Alameda', '2008-07-01', 0),
    ('07', 'Mission Valley', 'San Diego', 'San Diego', '2009-08-24', 0),
    ('08', 'Golden Gate Tech', 'San Francisco', 'San Francisco', '2007-01-08', 1);
INSERT INTO frpm VALUES
    ('01', 640, 410), ('02', 320, 120), ('03', 1510, 980), ('04', 450, 200),
    ('05', 380, 60), ('06', 700, 350), ('07', 910, 300), ('08', 520, 140);
"""

CALIFORNIA_SCHOOLS_DESCRIPTOR = {
    "database_id": "california_schools",
    "dialect": "sqlite",
    "tables": [
        {
            "name": "schools",
            "row_count": 8,
            "columns": [
                {"name": "CDSCode", "declared_type": "TEXT", "description": "school identifier",
                 "sample_values": ["01", "02", "03"]},
                {"name": "School", "declared_type": "TEXT", "description": "school name",
                 "sample_values": ["Bay Middle", "Echo Park High", "Harbor Charter"]},
                {"name": "City", "declared_type": "TEXT", "description": "city of the school address, full name",
                 "sample_values": ["Long Beach", "Los Angeles", "Oakland"]},
                {"name": "County", "declared_type": "TEXT", "description": "county name",
                 "sample_values": ["Alameda", "Los Angeles", "San Diego"]},
                {"name": "OpenDate", "declared_type": "TEXT", "description": "date the school opened, YYYY-MM-DD",
                 "sample_values": ["1998-08-20", "2007-01-08", "2008-07-01"]},
                {"name": "Charter", "declared_type": "INTEGER", "description": "1 for charter schools",
                 "sample_values": ["0", "1"]},
            ],
        },
        {
            "name": "frpm",
            "row_count": 8,
            "columns": [
                {"name": "CDSCode", "declared_type": "TEXT", "description": "school identifier",
                 "sample_values": ["01", "02", "03"]},
                {"name": "Enrollment", "declared_type": "INTEGER", "description": "K-12 enrollment",
                 "sample_values": ["320", "380", "450"]},
                {"name": "FreeMealCount", "declared_type": "INTEGER", "description": "K-12 students eligible for free meals",
                 "sample_values": ["120", "140", "200"]},
            ],
        },
    ],
}

COMPANY = """
CREATE TABLE employees (
    employeeId INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    gender TEXT,
    department TEXT,
    salary INTEGER,
    hire_date TEXT
);
CREATE TABLE users (
    userId INTEGER PRIMARY KEY,
    name TEXT NOT NULL,
    age INTEGER,
    city TEXT,
    registration_date TEXT
);
CREATE TABLE orders (
    orderId INTEGER PRIMARY KEY,
    userId INTEGER REFERENCES users(userId),
    amount REAL NOT NULL,
    currency TEXT NOT NULL,
    order_date TEXT
);
INSERT INTO employees VALUES
    (1, 'Alice Moreau', 'F', 'Sales', 72000, '2015-03-01'),
    (2, 'Robin Clarke', 'F', 'Engineering', 98000, '2017-06-12'),
    (3, 'Daniel Okafor', 'M', 'Engineering', 91000, '2016-01-20'),
    (4, 'Maria Lopez', 'F', 'Finance', 83000, '2019-09-09'),
    (5, 'Kim Park', 'M', 'Sales', 65000, '2021-02-15'),
    (6, 'Sam Taylor', 'M', 'Support', 52000, '2020-11-30');
INSERT INTO users VALUES
    (1, 'jdoe', 34, 'NYC', '2019-05-14'),
    (2, 'mchen', 61, 'Boston', '2021-01-03'),
    (3, 'apatel', 45, 'NYC', '2018-11-22'),
    (4, 'lgarcia', 29, 'Chicago', '2020-07-08'),
    (5, 'tnguyen', 52, 'Seattle', '2018-02-17');
INSERT INTO orders VALUES
    (1, 1, 120.0, 'USD', '2024-05-02'),
    (2, 2, 80.0, 'EUR', '2024-05-09'),
    (3, 3, 45.5, 'USD', '2024-06-01'),
    (4, 4, 200.0, 'EUR', '2024-06-15'),
    (5, 1, 60.0, 'EUR', '2024-06-20');
"""


def build_db(name, sql):
    path = os.path.join(DB_DIR, name + ".sqlite")
    if os.path.exists(path):
        os.remove(path)
    conn = sqlite3.connect(path)
    conn.executescript(sql)
    conn.commit()
    conn.close()


def span(question, phrase):
    start = question.index(phrase)
    return [start, start + len(phrase)]


def option(display, resolution, column=None):
    o = {"display": display, "resolution": resolution}
    if column:
        o["column"] = column
    return o


# Each case: the annotated dataset line plus everything the scripted
# components need to answer for it.
CASES = [
    {
        "id": "f1-vietnam-ranked",
        "source": "BIRD",
        "database_id": "formula_1",
        "question": "How many drivers born after the end of the Vietnam War have been ranked 2?",
        "gold_sql": "SELECT COUNT(DISTINCT T1.driverId) FROM drivers AS T1 INNER JOIN results AS T2 "
                    "ON T1.driverId = T2.driverId WHERE T1.dob > '1975-04-30' AND T2.rank = 2",
        "without_sql": "SELECT COUNT(DISTINCT T1.driverId) FROM drivers AS T1 INNER JOIN results AS T2 "
                       "ON T1.driverId = T2.driverId WHERE STRFTIME('%Y', T1.dob) > '1975' AND T2.position = 2",
        "ambiguities": [
            {
                "phrase": "end of the Vietnam War",
                "category": "ambiguous_temporal_spatial_scope",
                "rationale": "The war's end can be read as the fall of Saigon on 1975-04-30 or as the year 1975; "
                             "the start of US involvement is also sometimes meant.",
                "gold_resolution": "Born after the end date of the war, 1975-04-30.",
                "clarification": {
                    "question": "Which point in time should \"the end of the Vietnam War\" stand for?",
                    "options": [
                        option("Start date (1955-11-01)",
                               "Born after the start of the Vietnam War means born after 1955-11-01."),
                        option("End date (1975-04-30)",
                               "Born after the end of the Vietnam War means born after 1975-04-30."),
                        option("End year (1975)",
                               "Born after the end of the Vietnam War means born in 1976 or later."),
                    ],
                },
            },
            {
                "phrase": "ranked 2",
                "category": "unclear_schema_reference",
                "rationale": "\"ranked 2\" may refer to results.position, results.rank or driverStandings.position.",
                "gold_resolution": "Use the rank column of the results table.",
                "clarification": {
                    "question": "Which column does \"ranked 2\" refer to?",
                    "options": [
                        option("results.position (finishing position in a race)",
                               "Ranked 2 refers to the position column of the results table (finishing position).",
                               "results.position"),
                        option("results.rank (fastest-lap rank in a race)",
                               "Ranked 2 refers to the rank column of the results table (fastest-lap rank).",
                               "results.rank"),
                        option("driverStandings.position (championship standing)",
                               "Ranked 2 refers to the position column of the driverStandings table (championship standing).",
                               "driverStandings.position"),
                    ],
                },
            },
        ],
        "refine_match": "resolution: Ranked 2 refers to the rank column of the results table (fastest-lap rank).",
        "rewritten": "How many drivers born after 1975-04-30 have been ranked 2 in the rank column of the results table?",
    },
    {
        "id": "f1-schumacher-2015",
        "source": "BIRD",
        "database_id": "formula_1",
        "question": "How many points did Michael Schumacher score in his 2015 Ferrari season?",
        "gold_sql": "SELECT SUM(T2.points) FROM drivers AS T1 INNER JOIN results AS T2 ON T1.driverId = T2.driverId "
                    "INNER JOIN races AS T3 ON T2.raceId = T3.raceId "
                    "WHERE T1.forename = 'Michael' AND T1.surname = 'Schumacher' AND T3.year = 2006",
        "without_sql": "SELECT SUM(T2.points) FROM drivers AS T1 INNER JOIN results AS T2 ON T1.driverId = T2.driverId "
                       "INNER JOIN races AS T3 ON T2.raceId = T3.raceId "
                       "WHERE T1.forename = 'Michael' AND T1.surname = 'Schumacher' AND T3.year = 2015",
        "ambiguities": [
            {
                "phrase": "his 2015 Ferrari season",
                "category": "conflicting_knowledge",
                "rationale": "Michael Schumacher last drove for Ferrari in 2006 and retired in 2012; he had no 2015 season.",
                "gold_resolution": "Use 2006, his last season with Ferrari.",
                "clarification": {
                    "question": "Michael Schumacher did not race in 2015. Which season do you mean?",
                    "options": [
                        option("2006, his last Ferrari season",
                               "Use the 2006 season, his last season with Ferrari."),
                        option("2012, his last Formula One season",
                               "Use the 2012 season, his last Formula One season."),
                        option("Keep 2015 as written",
                               "Keep the year 2015 as written even if no race matches."),
                    ],
                },
            },
        ],
        "refine_match": "resolution: Use the 2006 season, his last season with Ferrari.",
        "rewritten": "How many points did Michael Schumacher score in the 2006 season, his last season with Ferrari?",
    },
    {
        "id": "schools-la",
        "source": "BIRD",
        "database_id": "california_schools",
        "question": "How many schools are located in LA?",
        "gold_sql": "SELECT COUNT(*) FROM schools WHERE City = 'Los Angeles'",
        "without_sql": "SELECT COUNT(*) FROM schools WHERE City = 'LA'",
        "ambiguities": [
            {
                "phrase": "LA",
                "category": "unclear_value_reference",
                "rationale": "schools.City stores full city names such as 'Los Angeles'; the abbreviation 'LA' does not occur.",
                "gold_resolution": "The city stored as Los Angeles.",
                "clarification": {
                    "question": "How is \"LA\" stored in the database?",
                    "options": [
                        option("City = 'Los Angeles'",
                               "LA means the city stored as 'Los Angeles' in schools.City.",
                               "schools.City"),
                        option("City = 'LA' (literal)",
                               "LA means the literal value 'LA' in schools.City.",
                               "schools.City"),
                    ],
                },
            },
        ],
        "refine_match": "resolution: LA means the city stored as 'Los Angeles' in schools.City.",
        "rewritten": "How many schools are located in the city stored as 'Los Angeles' in schools.City?",
    },
    {
        "id": "schools-2008-crisis",
        "source": "TAG",
        "database_id": "california_schools",
        "question": "List the schools that opened after the 2008 financial crisis.",
        "gold_sql": "SELECT School FROM schools WHERE OpenDate > '2009-06-30'",
        "without_sql": "SELECT School FROM schools WHERE OpenDate > '2008-12-31'",
        "ambiguities": [
            {
                "phrase": "after the 2008 financial crisis",
                "category": "ambiguous_temporal_spatial_scope",
                "rationale": "The crisis can be dated to the Lehman collapse (2008-09-15), to the end of the "
                             "recession (2009-06-30) or to the calendar year 2008.",
                "gold_resolution": "Opened after 2009-06-30, when the recession ended.",
                "clarification": {
                    "question": "Which cut-off should \"after the 2008 financial crisis\" use?",
                    "options": [
                        option("Lehman Brothers collapse (2008-09-15)",
                               "Opened after 2008-09-15, the Lehman Brothers collapse."),
                        option("End of the recession (2009-06-30)",
                               "Opened after 2009-06-30, the official end of the recession."),
                        option("Year 2008",
                               "Opened in 2009 or later."),
                    ],
                },
            },
        ],
        "refine_match": "resolution: Opened after 2009-06-30, the official end of the recession.",
        "rewritten": "List the schools that opened after 2009-06-30, the official end of the recession.",
    },
    {
        "id": "company-oldest-user",
        "source": "custom",
        "database_id": "company",
        "question": "Who is the oldest user?",
        "gold_sql": "SELECT name FROM users ORDER BY registration_date ASC LIMIT 1",
        "without_sql": "SELECT name FROM users ORDER BY age DESC LIMIT 1",
        "ambiguities": [
            {
                "phrase": "oldest user",
                "category": "unclear_schema_reference",
                "rationale": "\"oldest\" may rank by users.age or by users.registration_date.",
                "gold_resolution": "The user with the earliest registration date.",
                "clarification": {
                    "question": "What makes a user the oldest?",
                    "options": [
                        option("Highest age (users.age)",
                               "The oldest user is the one with the highest age in users.age.",
                               "users.age"),
                        option("Earliest registration (users.registration_date)",
                               "The oldest user is the one with the earliest registration date in users.registration_date.",
                               "users.registration_date"),
                    ],
                },
            },
        ],
        "refine_match": "resolution: The oldest user is the one with the earliest registration date",
        "rewritten": "Who is the user with the earliest registration date in users.registration_date?",
    },
    {
        "id": "company-users-by-date",
        "source": "custom",
        "database_id": "company",
        "question": "Show me users by registration date",
        "gold_sql": "SELECT name, registration_date FROM users ORDER BY registration_date",
        "without_sql": "SELECT registration_date, COUNT(*) FROM users GROUP BY registration_date",
        "ambiguities": [
            {
                "phrase": "by registration date",
                "category": "missing_sql_keywords",
                "rationale": "\"by\" may mean ORDER BY, GROUP BY or a WHERE filter on users.registration_date.",
                "gold_resolution": "Sort the users by registration date, ascending.",
                "clarification": {
                    "question": "What should \"by registration date\" do?",
                    "options": [
                        option("Sort (ORDER BY)",
                               "Sort the users by registration_date in ascending order.",
                               "users.registration_date"),
                        option("Group and count (GROUP BY)",
                               "Count the users for each registration_date.",
                               "users.registration_date"),
                        option("Filter (WHERE)",
                               "Only include users registered on a given registration_date.",
                               "users.registration_date"),
                    ],
                },
            },
        ],
        "refine_match": "resolution: Sort the users by registration_date in ascending order.",
        "rewritten": "Show me users sorted by registration_date in ascending order",
    },
    {
        "id": "company-female-employees",
        "source": "TAG",
        "database_id": "company",
        "question": "List the female employees.",
        "gold_sql": "SELECT name FROM employees WHERE gender = 'F'",
        "without_sql": "SELECT name FROM employees WHERE gender = 'F'",
        "ambiguities": [
            {
                "phrase": "female employees",
                "category": "unclear_knowledge_source",
                "rationale": "Gender can be read from the stored gender column or inferred from first names.",
                "gold_resolution": "Use the gender column stored in the employees table.",
                "clarification": {
                    "question": "Where should the gender of an employee come from?",
                    "options": [
                        option("Stored gender column",
                               "Use the gender column of the employees table, where 'F' marks female employees."),
                        option("Infer from first names",
                               "Infer each employee's gender from their first name."),
                    ],
                },
            },
        ],
        "refine_match": "resolution: Use the gender column of the employees table",
        "rewritten": "List the employees whose gender column in the employees table is 'F'.",
    },
    {
        "id": "company-exchange-rate",
        "source": "TAG",
        "database_id": "company",
        "question": "What is the total order amount in USD at the current exchange rate?",
        "gold_sql": "SELECT SUM(CASE WHEN currency = 'EUR' THEN amount * 1.10 ELSE amount END) FROM orders",
        "without_sql": "SELECT SUM(amount) FROM orders",
        "ambiguities": [
            {
                "phrase": "current exchange rate",
                "category": "insufficient_reasoning_context",
                "rationale": "The rate and its date are not given, and the orders mix EUR and USD amounts.",
                "gold_resolution": "Convert EUR to USD at 1.10.",
                "clarification": {
                    "question": "Which exchange rate should convert EUR amounts to USD?",
                    "options": [
                        option("1.10 USD per EUR (rate of 2024-06-28)",
                               "Convert EUR amounts to USD at 1.10 USD per EUR and keep USD amounts unchanged."),
                        option("1.08 USD per EUR (rate of 2024-01-02)",
                               "Convert EUR amounts to USD at 1.08 USD per EUR and keep USD amounts unchanged."),
                    ],
                },
            },
        ],
        "refine_match": "resolution: Convert EUR amounts to USD at 1.10 USD per EUR",
        "rewritten": "What is the total order amount in USD when EUR amounts are converted at 1.10 USD per EUR "
                     "and USD amounts are kept unchanged?",
    },
]

# The running example with the nationality constraint from the interactive demo.
GERMAN_CONSTRAINT = "drivers need to be German"
GERMAN_REWRITE = ("How many drivers born after 1975-04-30 have been ranked 2 in the rank column of the "
                  "results table, where drivers need to be German?")
GERMAN_SQL = ("SELECT COUNT(DISTINCT T1.driverId) FROM drivers AS T1 INNER JOIN results AS T2 "
              "ON T1.driverId = T2.driverId WHERE T1.dob > '1975-04-30' AND T2.rank = 2 "
              "AND T1.nationality = 'German'")

# A question the detector considers clean, for the no-ambiguity path.
CLEAN_QUESTION = "How many races were held in 2006?"
CLEAN_SQL = "SELECT COUNT(*) FROM races WHERE year = 2006"


def detection_json(case):
    return json.dumps(
        [{"phrase": a["phrase"], "category": a["category"], "rationale": a["rationale"]}
         for a in case["ambiguities"]],
        indent=1,
    )


def entry(stage, match, response):
    return {"stage": stage, "match_substring": match, "response": response}


def build_scripts():
    pipeline = []
    generator = []
    # Rewritten questions first: their entries must win over the originals'.
    pipeline.append(entry("detect", "QUESTION: " + GERMAN_REWRITE, "```json\n[]\n```"))
    for case in CASES:
        pipeline.append(entry("detect", "QUESTION: " + case["rewritten"], "```json\n[]\n```"))
    pipeline.append(entry("detect", "QUESTION: " + CLEAN_QUESTION, "```json\n[]\n```"))
    for case in CASES:
        pipeline.append(entry("detect", "QUESTION: " + case["question"],
                              "```json\n" + detection_json(case) + "\n```"))
    for case in CASES:
        for a in case["ambiguities"]:
            pipeline.append(entry("clarify", 'AMBIGUOUS PHRASE: "%s"' % a["phrase"],
                                  "```json\n" + json.dumps(a["clarification"], indent=1) + "\n```"))
    pipeline.append(entry("refine", "- " + GERMAN_CONSTRAINT, GERMAN_REWRITE))
    for case in CASES:
        pipeline.append(entry("refine", case["refine_match"], case["rewritten"]))

    generator.append({"match_substring": GERMAN_REWRITE, "sql": GERMAN_SQL})
    for case in CASES:
        generator.append({"match_substring": case["rewritten"], "sql": case["gold_sql"]})
    generator.append({"match_substring": CLEAN_QUESTION, "sql": CLEAN_SQL})
    for case in CASES:
        generator.append({"match_substring": case["question"], "sql": case["without_sql"]})
    return pipeline, generator


def build_cases():
    lines = []
    for case in CASES:
        q = case["question"]
        lines.append(json.dumps({
            "id": case["id"],
            "source": case["source"],
            "database_id": case["database_id"],
            "question": q,
            "gold_sql": case["gold_sql"],
            "annotations": [
                {"phrase": a["phrase"], "span": span(q, a["phrase"]), "category": a["category"],
                 "gold_resolution": a["gold_resolution"]}
                for a in case["ambiguities"]
            ],
        }))
    return "\n".join(lines) + "\n"


def main():
    os.makedirs(DB_DIR, exist_ok=True)
    os.makedirs(SCRIPT_DIR, exist_ok=True)
    build_db("formula_1", FORMULA_1)
    build_db("california_schools", CALIFORNIA_SCHOOLS)
    build_db("company", COMPANY)
    with open(os.path.join(DB_DIR, "california_schools.json"), "w") as f:
        json.dump(CALIFORNIA_SCHOOLS_DESCRIPTOR, f, indent=2)
        f.write("\n")
    with open(os.path.join(ROOT, "cases.jsonl"), "w") as f:
        f.write(build_cases())
    pipeline, generator = build_scripts()
    with open(os.path.join(SCRIPT_DIR, "pipeline.json"), "w") as f:
        json.dump(pipeline, f, indent=2)
        f.write("\n")
    with open(os.path.join(SCRIPT_DIR, "generator.json"), "w") as f:
        json.dump(generator, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
