"""Write a small synthetic corpus in the public SGD layout.

Six services with scripted flows; every user turn carries the cumulative
`state.slot_values` of its service, the way the public release does. Bus and
salon dialogues end with a system confirmation so the multi-slot pipeline has
material; doctor, dentist, payment and ride dialogues exercise name-split,
relation and address.
"""

from __future__ import annotations

import json
import logging
import random
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

logger = logging.getLogger(__name__)

DIALOGUES_PER_FILE = 100
SECOND_SERVICE_RATE = 0.3

SCHEMAS: List[Dict[str, Any]] = [
    {
        "service_name": "Buses_1",
        "description": "Book bus journeys between cities",
        "slots": [
            {"name": "from_location", "description": "City where the bus is leaving from", "is_categorical": False, "possible_values": []},
            {"name": "to_location", "description": "Destination city of the trip", "is_categorical": False, "possible_values": []},
            {"name": "leaving_date", "description": "Date of departure", "is_categorical": False, "possible_values": []},
            {"name": "leaving_time", "description": "Time of departure", "is_categorical": False, "possible_values": []},
            {"name": "travelers", "description": "Number of travelers for the journey", "is_categorical": True, "possible_values": ["1", "2", "3", "4", "5"]},
        ],
        "intents": [
            {
                "name": "BuyBusTicket",
                "required_slots": ["from_location", "to_location", "leaving_date", "leaving_time", "travelers"],
                "optional_slots": {},
            }
        ],
    },
    {
        "service_name": "Salons_1",
        "description": "Book appointments at hair salons",
        "slots": [
            {"name": "stylist_name", "description": "Name of the salon", "is_categorical": False, "possible_values": []},
            {"name": "appointment_date", "description": "Date of the appointment", "is_categorical": False, "possible_values": []},
            {"name": "appointment_time", "description": "Time of the appointment", "is_categorical": False, "possible_values": []},
            {"name": "confirm_booking", "description": "Whether the user confirms the booking", "is_categorical": True, "possible_values": ["True", "False"]},
        ],
        "intents": [
            {
                "name": "BookAppointment",
                "required_slots": ["stylist_name", "appointment_date", "appointment_time"],
                "optional_slots": {"confirm_booking": "True"},
            }
        ],
    },
    {
        "service_name": "Doctors_1",
        "description": "Book appointments with doctors",
        "slots": [
            {"name": "doctor_name", "description": "Name of the doctor", "is_categorical": False, "possible_values": []},
            {"name": "appointment_date", "description": "Date of the appointment", "is_categorical": False, "possible_values": []},
            {"name": "appointment_time", "description": "Time of the appointment", "is_categorical": False, "possible_values": []},
        ],
        "intents": [
            {"name": "BookDoctor", "required_slots": ["doctor_name", "appointment_date", "appointment_time"], "optional_slots": {}}
        ],
    },
    {
        "service_name": "Payment_1",
        "description": "Send money to friends and family",
        "slots": [
            {"name": "amount", "description": "Amount of money to send", "is_categorical": False, "possible_values": []},
            {"name": "receiver", "description": "Name of the receiver", "is_categorical": False, "possible_values": []},
            {"name": "payment_method", "description": "Source of the money", "is_categorical": True, "possible_values": ["app balance", "debit card", "credit card"]},
            {"name": "private_visibility", "description": "Whether the transaction is private", "is_categorical": True, "possible_values": ["True", "False"]},
        ],
        "intents": [
            {
                "name": "MakePayment",
                "required_slots": ["amount", "receiver"],
                "optional_slots": {"payment_method": "app balance", "private_visibility": "False"},
            }
        ],
    },
    {
        "service_name": "RideSharing_1",
        "description": "Book a cab to a destination",
        "slots": [
            {"name": "destination", "description": "Destination address of the ride", "is_categorical": False, "possible_values": []},
            {"name": "number_of_riders", "description": "Number of riders", "is_categorical": True, "possible_values": ["1", "2", "3", "4"]},
            {"name": "shared_ride", "description": "Whether the ride is shared with other riders", "is_categorical": True, "possible_values": ["True", "False"]},
        ],
        "intents": [
            {
                "name": "GetRide",
                "required_slots": ["destination", "number_of_riders"],
                "optional_slots": {"shared_ride": "False"},
            }
        ],
    },
    {
        "service_name": "Dentists_1",
        "description": "Find dentists and book visits",
        "slots": [
            {"name": "city", "description": "City where the dentist is located", "is_categorical": False, "possible_values": []},
            {"name": "dentist_name", "description": "Name of the dentist", "is_categorical": False, "possible_values": []},
        ],
        "intents": [{"name": "FindDentist", "required_slots": ["city"], "optional_slots": {"dentist_name": "dontcare"}}],
    },
]

CITIES = ("Fresno", "Long Beach", "San Diego", "Sacramento", "Los Angeles", "Portland", "Seattle", "Anaheim")
DATES = ("March 10th", "the 1st", "the 4th", "next Monday", "April 2nd", "this Friday", "the 13th")
TIMES = ("1:40 pm", "9:15 am", "6 pm", "11:30 am", "evening 6:45", "2 pm")
SALONS = ("Salon Revel", "Hair by Nina", "Bella Salon", "The Cut Studio", "Great Clips")
DOCTORS = ("dr. starks jayum bennett", "Dr. Maria Lopez", "dr. alan grant", "Dr. Priya Raman", "Dr. John Michael Ortiz")
DENTISTS = ("Dr. Ann Wu", "dr. james holt", "Dr. Kevin Park")
AMOUNTS = ("$370", "$25", "$1,200", "$60", "$84")
RECEIVERS = ("George Sidney", "Anna Chen", "Mark Olsen", "Leila Haddad", "Tom Becker")
DESTINATIONS = (
    "11 Hickson Road Walsh Bay",
    "221 Baker Street London Marylebone",
    "350 Fifth Avenue Manhattan New York",
    "1600 Amphitheatre Parkway Mountain View California",
    "42 Wallaby Way Sydney",
)

# (speaker, utterance, slot updates applied after a USER turn)
Step = Tuple[str, str, Dict[str, str]]


def _bus(rng: random.Random) -> List[Step]:
    src, dst = rng.sample(CITIES, 2)
    date, time, n = rng.choice(DATES), rng.choice(TIMES), str(rng.randint(1, 5))
    return [
        ("USER", f"I need a bus ticket from {src}.", {"from_location": src}),
        ("SYSTEM", "Where are you heading?", {}),
        ("USER", f"To {dst}.", {"to_location": dst}),
        ("SYSTEM", "When do you want to leave, and how many seats do you need?", {}),
        ("USER", f"On {date} at {time}. I need {n} seats.", {"leaving_date": date, "leaving_time": time, "travelers": n}),
        ("SYSTEM", f"Please confirm: a bus from {src} to {dst} on {date} at {time} for {n}.", {}),
        ("USER", "Yes, that's right.", {}),
    ]


def _salon(rng: random.Random) -> List[Step]:
    salon, date, time = rng.choice(SALONS), rng.choice(DATES), rng.choice(TIMES)
    yes = rng.random() < 0.8
    return [
        ("USER", "I need a salon appointment.", {}),
        ("SYSTEM", "Do you have a preferred salon? What date and time do you have in mind for the appointment?", {}),
        ("USER", f"I like an appointment at {salon} on {date} at {time}.", {"stylist_name": salon, "appointment_date": date, "appointment_time": time}),
        ("SYSTEM", f"Please confirm: an appointment at {salon} on {date} at {time}.", {}),
        ("USER", "Yes." if yes else "No.", {"confirm_booking": "True" if yes else "False"}),
    ]


def _doctor(rng: random.Random) -> List[Step]:
    doctor, date, time = rng.choice(DOCTORS), rng.choice(DATES), rng.choice(TIMES)
    return [
        ("USER", f"I want to see {doctor}.", {"doctor_name": doctor}),
        ("SYSTEM", "Sure. Which day works for you?", {}),
        ("USER", f"On {date}, at {time}.", {"appointment_date": date, "appointment_time": time}),
        ("SYSTEM", "Your appointment is booked.", {}),
    ]


def _payment(rng: random.Random) -> List[Step]:
    amount, receiver = rng.choice(AMOUNTS), rng.choice(RECEIVERS)
    method = rng.choice(("app balance", "debit card", "credit card"))
    private = rng.random() < 0.5
    return [
        ("USER", f"I want to send {amount} to {receiver}.", {"amount": amount, "receiver": receiver}),
        ("SYSTEM", "Which payment method should I use?", {}),
        ("USER", f"Use my {method}.", {"payment_method": method}),
        ("SYSTEM", "Should the transaction be private?", {}),
        ("USER", "Yes, keep it private." if private else "No, it can be public.", {"private_visibility": "True" if private else "False"}),
    ]


def _ride(rng: random.Random) -> List[Step]:
    destination, riders = rng.choice(DESTINATIONS), str(rng.randint(1, 4))
    shared = rng.random() < 0.5
    return [
        ("USER", f"I need a cab to {destination}.", {"destination": destination}),
        ("SYSTEM", "How many riders?", {}),
        ("USER", f"We are {riders}.", {"number_of_riders": riders}),
        ("SYSTEM", "Is a shared ride okay?", {}),
        ("USER", "Yes, shared is fine." if shared else "No, a private ride please.", {"shared_ride": "True" if shared else "False"}),
    ]


def _dentist(rng: random.Random) -> List[Step]:
    city, dentist = rng.choice(CITIES), rng.choice(DENTISTS)
    steps: List[Step] = [
        ("USER", "I need to find a dentist.", {}),
        ("SYSTEM", "Do you have an area?", {}),
        ("USER", f"I would like it in {city}.", {"city": city}),
        ("SYSTEM", "Do you have a dentist in mind?", {}),
    ]
    if rng.random() < 0.3:
        steps.append(("USER", "Anyone is fine.", {"dentist_name": "dontcare"}))
    else:
        steps.append(("USER", f"Yes, {dentist}.", {"dentist_name": dentist}))
    return steps


FLOWS: Dict[str, Callable[[random.Random], List[Step]]] = {
    "Buses_1": _bus,
    "Salons_1": _salon,
    "Doctors_1": _doctor,
    "Payment_1": _payment,
    "RideSharing_1": _ride,
    "Dentists_1": _dentist,
}


def sample_dialogue(dialogue_id: str, rng: random.Random) -> Dict[str, Any]:
    services = [rng.choice(sorted(FLOWS))]
    if rng.random() < SECOND_SERVICE_RATE:
        services.append(rng.choice([s for s in sorted(FLOWS) if s != services[0]]))
    turns = []
    for service in services:
        state: Dict[str, List[str]] = {}
        for speaker, utterance, updates in FLOWS[service](rng):
            turn: Dict[str, Any] = {"speaker": speaker, "utterance": utterance, "frames": []}
            if speaker == "USER":
                for slot, value in updates.items():
                    state[slot] = [value]
                turn["frames"].append({"service": service, "state": {"slot_values": {k: list(v) for k, v in state.items()}}})
            turns.append(turn)
    return {"dialogue_id": dialogue_id, "services": services, "turns": turns}


def write_sample_corpus(directory: str | Path, n_dialogues: int = 200, seed: int = 0) -> Path:
    """schema.json plus dialogues_NNN.json files of up to 100 dialogues each."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "schema.json").write_text(json.dumps(SCHEMAS, indent=2) + "\n", encoding="utf-8")
    rng = random.Random(seed)
    dialogues = [sample_dialogue(f"1_{i:05d}", rng) for i in range(n_dialogues)]
    for start in range(0, n_dialogues, DIALOGUES_PER_FILE):
        chunk = dialogues[start : start + DIALOGUES_PER_FILE]
        path = directory / f"dialogues_{start // DIALOGUES_PER_FILE + 1:03d}.json"
        path.write_text(json.dumps(chunk, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %d sample dialogues to %s", n_dialogues, directory)
    return directory
