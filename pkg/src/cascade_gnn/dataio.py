"""On-disk dataset formats.

A dataset directory holds users.jsonl, follows.csv, cascades.jsonl and
urls.jsonl.  Embedding components are rounded to 7 significant digits on
write; everything else round-trips exactly.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .types import CascadeRecord, SocialGraph, Tweet, UrlStory, User

USERS_FILE = "users.jsonl"
FOLLOWS_FILE = "follows.csv"
CASCADES_FILE = "cascades.jsonl"
URLS_FILE = "urls.jsonl"


class DatasetNotFoundError(FileNotFoundError):
    pass


def _round_vec(vec: np.ndarray) -> list[float]:
    return [float(f"{x:.7g}") for x in vec]


def _user_record(u: User) -> dict:
    return {
        "user_id": u.user_id,
        "geo_enabled": u.geo_enabled,
        "background_picture": u.background_picture,
        "default_profile": u.default_profile,
        "default_profile_image": u.default_profile_image,
        "verified": u.verified,
        "lang": u.lang,
        "description_embedding": _round_vec(u.description_embedding),
        "statuses_count": u.statuses_count,
        "favourites_count": u.favourites_count,
        "listed_count": u.listed_count,
        "followers_count": u.followers_count,
        "friends_count": u.friends_count,
        "created_at": u.created_at,
    }


def _tweet_record(t: Tweet) -> dict:
    return {
        "tweet_id": t.tweet_id,
        "author": t.author,
        "timestamp": t.timestamp,
        "is_source": t.is_source,
        "retweeted_reply_count": t.retweeted_reply_count,
        "retweeted_quote_count": t.retweeted_quote_count,
        "retweeted_favorite_count": t.retweeted_favorite_count,
        "retweeted_retweet_count": t.retweeted_retweet_count,
        "source_device": t.source_device,
        "text_embedding": _round_vec(t.text_embedding),
        "hashtag_embedding": _round_vec(t.hashtag_embedding),
    }


def write_dataset(dirpath, social: SocialGraph, stories: list[UrlStory],
                  cascades: list[CascadeRecord]) -> None:
    os.makedirs(dirpath, exist_ok=True)

    with open(os.path.join(dirpath, USERS_FILE), "w", encoding="utf-8") as fh:
        for uid in sorted(social.users):
            fh.write(json.dumps(_user_record(social.users[uid])) + "\n")

    with open(os.path.join(dirpath, FOLLOWS_FILE), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["follower_id", "followee_id"])
        for a, b in sorted(social.follows):
            writer.writerow([a, b])

    with open(os.path.join(dirpath, CASCADES_FILE), "w", encoding="utf-8") as fh:
        for cas in sorted(cascades, key=lambda c: c.cascade_id):
            rec = {"cascade_id": cas.cascade_id, "url_id": cas.url_id,
                   "tweets": [_tweet_record(t) for t in cas.tweets]}
            fh.write(json.dumps(rec) + "\n")

    with open(os.path.join(dirpath, URLS_FILE), "w", encoding="utf-8") as fh:
        for story in sorted(stories, key=lambda s: s.url_id):
            rec = {"url_id": story.url_id, "label": story.label,
                   "first_seen": story.first_seen,
                   "cascade_ids": list(story.cascade_ids)}
            fh.write(json.dumps(rec) + "\n")


def _require(path):
    if not os.path.isfile(path):
        raise DatasetNotFoundError(f"missing dataset file: {path}")
    return path


def load_dataset(dirpath) -> tuple[SocialGraph, list[UrlStory], list[CascadeRecord]]:
    users = {}
    with open(_require(os.path.join(dirpath, USERS_FILE)), "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            rec["description_embedding"] = np.asarray(rec["description_embedding"])
            users[rec["user_id"]] = User(**rec)

    follows = set()
    with open(_require(os.path.join(dirpath, FOLLOWS_FILE)), "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["follower_id", "followee_id"]:
            raise ValueError(f"unexpected follows.csv header: {header}")
        for row in reader:
            follows.add((row[0], row[1]))
    social = SocialGraph(users=users, follows=frozenset(follows))

    cascades = []
    with open(_require(os.path.join(dirpath, CASCADES_FILE)), "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            tweets = []
            for tr in rec["tweets"]:
                tr["text_embedding"] = np.asarray(tr["text_embedding"])
                tr["hashtag_embedding"] = np.asarray(tr["hashtag_embedding"])
                tweets.append(Tweet(cascade_id=rec["cascade_id"], **tr))
            cascades.append(CascadeRecord(rec["cascade_id"], rec["url_id"], tuple(tweets)))

    stories = []
    with open(_require(os.path.join(dirpath, URLS_FILE)), "r", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            stories.append(UrlStory(rec["url_id"], rec["label"], rec["first_seen"],
                                    tuple(rec["cascade_ids"])))
    return social, stories, cascades


def cascades_by_url(cascades: list[CascadeRecord]) -> dict[str, list[CascadeRecord]]:
    by_url: dict[str, list[CascadeRecord]] = {}
    for cas in cascades:
        by_url.setdefault(cas.url_id, []).append(cas)
    return by_url
